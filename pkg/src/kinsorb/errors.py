"""Exception hierarchy.

Each class maps to one CLI exit code (see :mod:`kinsorb.cli`).
"""


class KinsorbError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ParameterError(KinsorbError, ValueError):
    """Input outside the model's parameter domain."""

    exit_code = 2


class DomainError(ParameterError):
    """Operation undefined for the given input (e.g. conditioning on a null event)."""


class AccuracyError(KinsorbError, ArithmeticError):
    """A numerical procedure cannot reach the requested accuracy."""

    exit_code = 3

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class GridError(AccuracyError):
    """Spatial grid too small or too coarse for the requested computation."""


class QuadratureError(AccuracyError):
    """Numerical integration failed to converge."""


class ResourceError(KinsorbError):
    """Requested computation exceeds a hard resource limit."""

    exit_code = 4
