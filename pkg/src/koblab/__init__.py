"""Numerical laboratory for the Kobayashi-Royden pseudometric of Riemannian manifolds."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("koblab")
except PackageNotFoundError:  # source tree without installed metadata
    __version__ = "0.1.0"

from . import disc, errors, geometry, kernels, kobayashi, models, pinched, renormalize  # noqa: E402

__all__ = ["__version__", "disc", "errors", "geometry", "kernels", "kobayashi", "models", "pinched", "renormalize"]
