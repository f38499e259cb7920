"""Grid kernels, compiled when the extension is built, numpy otherwise.

Set ``KOBLAB_PURE_PYTHON=1`` to force the numpy path.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if not os.environ.get("KOBLAB_PURE_PYTHON"):
    try:
        from ._ext import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def _c(a, dtype=float):
    return np.ascontiguousarray(a, dtype)


def stencil(values, nbr, nbr_len, impl=None):
    """``(ux, uy, lap)`` at interior nodes; see ``koblab._kernels_py.stencil``."""
    impl = impl or _impl
    return impl.stencil(_c(values), _c(nbr, np.int64), _c(nbr_len))


def sub_mean_defect(f, nbr, nbr_len, centers, h, impl=None):
    """Scaled discrete Laplacian of a scalar field at ``centers``."""
    impl = impl or _impl
    return impl.sub_mean_defect(_c(f), _c(nbr, np.int64), _c(nbr_len), _c(centers, np.int64), float(h))
