"""Exception hierarchy shared by all gapfield modules."""


class GapfieldError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GapfieldError, ValueError):
    """A point lies where a map or field is undefined (e.g. a disk center)."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ConfigurationError(GapfieldError, ValueError):
    """Invalid geometry, conductivity or driver input."""


class SeriesError(GapfieldError, RuntimeError):
    """A reflection series could not be truncated with a certified tail."""


class InvariantError(GapfieldError, AssertionError):
    """An internal invariant that should hold for valid input was violated."""
