"""Exception types shared across the package."""


class StopgainError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(StopgainError, ValueError):
    """A model parameter violates its declared constraint."""


class RegimeError(StopgainError, ValueError):
    """An operation was called for a feedback gain it does not cover."""


class DomainError(StopgainError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ResourceError(StopgainError, RuntimeError):
    """A batch does not fit the configured working-memory budget."""


class EmptySampleError(StopgainError, ValueError):
    """An empirical estimate was requested from zero samples."""
