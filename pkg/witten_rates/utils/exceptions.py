"""
Custom exception classes

Every error raised on purpose by the package derives from WittenRatesError and
carries the process exit code the command-line frontend reports for it.
"""

from typing import Optional, Sequence


class WittenRatesError(Exception):
    """Base class for package errors"""

    exit_code = 1


class ConfigError(WittenRatesError, ValueError):
    """Raised when a run configuration or a precondition is invalid"""

    exit_code = 2


class DomainError(WittenRatesError, ValueError):
    """Raised when a potential is evaluated outside its domain"""

    exit_code = 2


class NonMorseError(WittenRatesError, ValueError):
    """Raised when a critical point has a degenerate Hessian"""

    exit_code = 2

    def __init__(self, message: str, location: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.location = location


class PartitionError(WittenRatesError, ValueError):
    """Raised when a well partition is degenerate or inconsistent"""

    exit_code = 2


class SemiclassicalError(WittenRatesError, ValueError):
    """Raised when a semiclassical estimate is outside its validity"""

    exit_code = 2


class ConvergenceError(WittenRatesError):
    """Raised when an iterative solve does not converge"""

    exit_code = 3

    def __init__(self, message: str, best_residual: float = float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class NumericError(WittenRatesError):
    """Raised when a linear solve breaks down"""

    exit_code = 3


class OutputError(WittenRatesError):
    """Raised when results cannot be written"""

    exit_code = 4
