"""Desk-scale laboratory for noisy bistable fronts and their curvature-flow limit."""

__version__ = "0.1.0"

from .errors import (ConvergenceError, NoInterfaceError, ParameterError,
                     SingularityError, StabilityError, StochacError,
                     SupportWindowError)

__all__ = [
    "__version__",
    "StochacError", "ParameterError", "SupportWindowError", "ConvergenceError",
    "StabilityError", "NoInterfaceError", "SingularityError",
]
