"""Exception types shared across the package."""

from __future__ import annotations


class HalfLieError(Exception):
    """Base class for all errors raised by this package."""


class SpecMismatchError(HalfLieError):
    """Operands belong to different group specifications."""


class NonInvertibleError(HalfLieError):
    """A group element is (numerically) singular."""


class OutOfChartError(HalfLieError):
    """A point left the exponential chart; we refuse to extrapolate."""


class ConvergenceFailureError(HalfLieError):
    """A refinement loop hit its depth cap without meeting the tolerance.

    Carries the last two iterates so the caller can inspect the stall.
    """

    def __init__(self, message, last_iterates=None):
        super().__init__(message)
        self.last_iterates = last_iterates


class PartialBracketUndefinedError(HalfLieError):
    """Bracket requested on fiber data declared outside the C^1 class."""


class NotDifferentiableError(HalfLieError):
    """Finite differencing of the derived action failed to converge."""


class WindowTooShortError(HalfLieError):
    """A cocycle window cannot accommodate the shifted bump supports."""


class QuadratureError(HalfLieError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class ConfigError(HalfLieError):
    """Invalid experiment configuration; ``path`` locates the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
