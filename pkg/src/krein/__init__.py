"""Krein systems for Muckenhoupt weights: accelerants, resolvents, continuous
orthogonal polynomials, remainders, weighted band projections and dyadic
Calderon-Zygmund decompositions."""

__version__ = "0.1.0"

from .errors import BadParameter, CrossCheckFailed, KreinError, NumericalBreakdown  # noqa: E402
from .harmonic import LambdaGrid, RGrid, make_grids  # noqa: E402
from .weights import Weight, make_weight  # noqa: E402

__all__ = ["BadParameter", "CrossCheckFailed", "KreinError", "LambdaGrid", "NumericalBreakdown", "RGrid",
           "Weight", "make_grids", "make_weight", "__version__"]
