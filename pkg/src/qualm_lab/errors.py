"""Exception hierarchy shared by every module of the package."""


class QualmError(Exception):
    """Base class for all package errors."""


class SizeError(QualmError, ValueError):
    """A requested object exceeds a configured size cap."""


class ShapeError(QualmError, ValueError):
    """Dimensions of the inputs do not line up."""


class ValidationError(QualmError, ValueError):
    """An input violates a numerical invariant (unitarity, completeness, PSD...)."""


class RankError(QualmError, ValueError):
    """A Gram matrix is singular for the requested (k, D)."""


class PreconditionError(QualmError, ValueError):
    """A documented precondition on the parameters does not hold."""


class ConsistencyError(QualmError, RuntimeError):
    """Two independent computations of the same quantity disagree."""


class ConfigError(QualmError, ValueError):
    """A configuration document is malformed or contains unknown fields."""


class DependencyError(QualmError, RuntimeError):
    """A required exact table cannot be produced for the requested parameters."""
