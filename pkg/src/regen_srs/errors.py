"""Exception hierarchy shared by all modules."""


class SRSError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(SRSError, ValueError):
    """Input violates a documented precondition or type invariant."""


class DomainMismatchError(ValidationError):
    """Two distributions live on different state intervals."""


class GridClosureError(ValidationError):
    """A map sends a grid point outside the grid."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class TailMassError(ValidationError):
    """Cycle enumeration is truncated beyond the admissible tolerance."""


class BudgetExceededError(SRSError):
    """Exact enumeration would exceed the configured work budget."""


class AmbiguousStationaryError(SRSError):
    """The chain has more than one closed communicating class."""

    def __init__(self, message, classes=()):
        super().__init__(message)
        self.classes = classes


class ConvergenceError(SRSError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SchemaError(ValidationError):
    """A JSON document does not match its schema; ``path`` locates the field."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path
