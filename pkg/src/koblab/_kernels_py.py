"""Pure numpy versions of the grid kernels (fallback for the compiled core)."""
import numpy as np


def stencil(values, nbr, nbr_len):
    """First derivatives and Shortley-Weller Laplacian at interior nodes.

    ``values`` is ``(nodes, n)``, interior nodes first; ``nbr``/``nbr_len``
    hold the +x, -x, +y, -y neighbours and arm lengths.  Derivatives use the
    three-point formula for unequal arms (exact on quadratics).
    Returns ``(ux, uy, lap)``, each ``(interior, n)``.
    """
    ni = nbr.shape[0]
    u0 = values[:ni]
    out = []
    lap = np.zeros_like(u0)
    for p, m in ((0, 1), (2, 3)):
        lp, lm = nbr_len[:, p, None], nbr_len[:, m, None]
        dp, dm = values[nbr[:, p]] - u0, values[nbr[:, m]] - u0
        out.append((lm * lm * dp - lp * lp * dm) / (lp * lm * (lp + lm)))
        lap += 2.0 / (lp + lm) * (dp / lp + dm / lm)
    return out[0], out[1], lap


def sub_mean_defect(f, nbr, nbr_len, centers, h):
    """``h^2/4`` times the Shortley-Weller Laplacian; on a uniform stencil this
    is the four-neighbour average minus the centre value."""
    f0 = f[centers]
    fn = f[nbr]
    lap = np.zeros_like(f0)
    for p, m in ((0, 1), (2, 3)):
        lp, lm = nbr_len[:, p], nbr_len[:, m]
        lap += 2.0 / (lp + lm) * ((fn[:, p] - f0) / lp + (fn[:, m] - f0) / lm)
    return 0.25 * h * h * lap
