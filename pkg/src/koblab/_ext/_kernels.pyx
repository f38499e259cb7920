# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled grid kernels; see ``koblab._kernels_py`` for the reference versions."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def stencil(const double[:, :] values, const long[:, :] nbr, const double[:, :] nbr_len):
    cdef Py_ssize_t ni = nbr.shape[0], n = values.shape[1], a, k, p, q, s
    cdef double lp, lm, u0, dp, dm
    ux = np.empty((ni, n))
    uy = np.empty((ni, n))
    lap = np.zeros((ni, n))
    cdef double[:, :] ox = ux, oy = uy, ol = lap
    for a in range(ni):
        for s in range(2):
            p = 2 * s
            q = p + 1
            lp = nbr_len[a, p]
            lm = nbr_len[a, q]
            for k in range(n):
                u0 = values[a, k]
                dp = values[nbr[a, p], k] - u0
                dm = values[nbr[a, q], k] - u0
                if s == 0:
                    ox[a, k] = (lm * lm * dp - lp * lp * dm) / (lp * lm * (lp + lm))
                else:
                    oy[a, k] = (lm * lm * dp - lp * lp * dm) / (lp * lm * (lp + lm))
                ol[a, k] += 2.0 / (lp + lm) * (dp / lp + dm / lm)
    return ux, uy, lap


def sub_mean_defect(const double[:] f, const long[:, :] nbr, const double[:, :] nbr_len,
                    const long[:] centers, double h):
    cdef Py_ssize_t m = centers.shape[0], a, c, p, q, s
    cdef double f0, lp, lm, acc
    out = np.empty(m)
    cdef double[:] o = out
    for a in range(m):
        c = centers[a]
        f0 = f[c]
        acc = 0.0
        for s in range(2):
            p = 2 * s
            q = p + 1
            lp = nbr_len[a, p]
            lm = nbr_len[a, q]
            acc += 2.0 / (lp + lm) * ((f[nbr[a, p]] - f0) / lp + (f[nbr[a, q]] - f0) / lm)
        o[a] = 0.25 * h * h * acc
    return out
