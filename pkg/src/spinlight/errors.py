"""Exception hierarchy with machine-readable categories."""


class SpinlightError(Exception):
    """Base class; ``category`` is reported by the command line tool."""

    category = "error"
    exit_code = 1


class ConfigurationError(SpinlightError, ValueError):
    category = "configuration"
    exit_code = 2


class GridMismatchError(SpinlightError, ValueError):
    category = "grid-mismatch"
    exit_code = 2


class StabilityError(SpinlightError, RuntimeError):
    """Raised when a time step violates the norm-drift guard."""

    category = "stability"
    exit_code = 3

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class QuadratureError(SpinlightError, RuntimeError):
    category = "quadrature"
    exit_code = 4


class OutputError(SpinlightError, OSError):
    category = "io"
    exit_code = 5


class ValidationError(SpinlightError):
    """A cross-check ran but did not meet its tolerance."""

    category = "validation-failed"
    exit_code = 6
