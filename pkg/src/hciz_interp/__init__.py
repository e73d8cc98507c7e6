"""Exponential and Gaussian-RBF interpolation, HCIZ error formulas and EI optimization."""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    BoundViolation,
    ConfigError,
    HcizInterpError,
    IllConditioned,
    NumericalError,
)
from .functions import AnalyticFunction, from_id, modulate_gaussian  # noqa: E402
from .interp import (  # noqa: E402
    FrequencySet,
    NodeSet,
    evaluate,
    fit,
    fit_exponential,
    fit_gaussian,
    fit_polynomial,
    run_convergence,
)

__all__ = [
    "__version__", "AnalyticFunction", "from_id", "modulate_gaussian",
    "NodeSet", "FrequencySet", "fit", "fit_polynomial", "fit_exponential",
    "fit_gaussian", "evaluate", "run_convergence", "HcizInterpError",
    "ConfigError", "NumericalError", "IllConditioned", "BoundViolation",
]
