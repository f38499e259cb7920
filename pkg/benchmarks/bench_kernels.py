"""Compare the compiled and numpy grid kernels, alone and inside a disc solve.

Run: ``python benchmarks/bench_kernels.py``.
"""
import argparse
import timeit

import numpy as np

from koblab import _kernels_py, disc, kernels, models


def _kernel_rows(sizes, repeat):
    rows = []
    for N in sizes:
        g = disc.disc_grid(N)
        vals = np.random.default_rng(0).standard_normal((len(g.nodes), 2))
        f = vals[:, 0].copy()
        centers = np.arange(g.n_interior)
        for name, impl in _impls():
            t_st = min(timeit.repeat(lambda: kernels.stencil(vals, g.nbr, g.nbr_len, impl), number=20,
                                     repeat=repeat)) / 20
            t_sm = min(timeit.repeat(lambda: kernels.sub_mean_defect(f, g.nbr, g.nbr_len, centers, g.h, impl),
                                     number=20, repeat=repeat)) / 20
            rows.append((N, name, t_st, t_sm))
    return rows


def _impls():
    out = [("python", _kernels_py)]
    if kernels.BACKEND == "cython":
        out.append(("cython", kernels._impl))
    return out


def _solve_rows(N, repeat):
    m = models.poincare_disc()
    rows = []
    saved = kernels._impl
    try:
        for name, impl in _impls():
            kernels._impl = impl
            t = min(timeit.repeat(lambda: disc.jet_disc(m, np.array([0.3, 0.1]), np.array([1.0, 0.0]),
                                                        np.array([0.0, 1.0]), 1.5, N=N),
                                  number=1, repeat=repeat))
            rows.append((N, name, t))
    finally:
        kernels._impl = saved
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="33,65,129")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"compiled backend available: {kernels.BACKEND == 'cython'}")
    print(f"{'N':>5} {'backend':>8} {'stencil [us]':>14} {'sub_mean [us]':>14}")
    for N, name, a, b in _kernel_rows(sizes, args.repeat):
        print(f"{N:>5} {name:>8} {a * 1e6:>14.1f} {b * 1e6:>14.1f}")
    print(f"{'N':>5} {'backend':>8} {'jet_disc [s]':>14}")
    for N in sizes[:2]:
        for N_, name, t in _solve_rows(N, args.repeat):
            print(f"{N_:>5} {name:>8} {t:>14.3f}")


if __name__ == "__main__":
    main()
