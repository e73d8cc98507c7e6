"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class HcizInterpError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(HcizInterpError, ValueError):
    """Invalid user-facing configuration (bad ids, flags, parameters)."""


class UnknownFunction(ConfigError):
    pass


class NumericalError(HcizInterpError, ArithmeticError):
    """A computation could not be carried out to the required accuracy."""


class SingularMatrix(NumericalError):
    def __init__(self, message: str, pivot: float | None = None):
        super().__init__(message)
        self.pivot = pivot


class IllConditioned(NumericalError):
    """Exact interpolation could not be certified.

    ``residual`` is the achieved residual; ``partial`` optionally carries
    whatever result was completed before the failure (a partial report or
    trace), and ``last_good`` the largest problem size that succeeded.
    """

    def __init__(self, message: str, residual: float | None = None,
                 partial=None, last_good: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.partial = partial
        self.last_good = last_good


class NotHermitian(NumericalError, ValueError):
    pass


class DegenerateVector(NumericalError, ValueError):
    pass


class OrderTooLarge(HcizInterpError, ValueError):
    pass


class SingularityTooClose(HcizInterpError, ValueError):
    pass


class DuplicateNodes(HcizInterpError, ValueError):
    pass


class DuplicateFrequencies(HcizInterpError, ValueError):
    pass


class DuplicateEntries(HcizInterpError, ValueError):
    pass


class BoundViolation(HcizInterpError, AssertionError):
    """A proven inequality failed numerically."""

    def __init__(self, message: str, value: float | None = None,
                 bound: float | None = None):
        super().__init__(message)
        self.value = value
        self.bound = bound
