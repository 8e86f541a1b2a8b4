"""Exception hierarchy shared across the package."""


class NhhmmError(Exception):
    """Base class for package errors."""


class ValidationError(NhhmmError, ValueError):
    """Bad user input: malformed data files, invalid configuration."""


class DimensionError(ValidationError):
    """Shape or mask-width mismatch between related objects."""


class DomainError(NhhmmError, ValueError):
    """Argument outside a distribution's parameter domain."""


class FactorizationError(NhhmmError, RuntimeError):
    """A matrix that must be symmetric positive-definite failed to factor."""


class FilterUnderflowError(NhhmmError, RuntimeError):
    """The scaled forward filter produced an all-zero row."""

    def __init__(self, t: int):
        self.t = t
        super().__init__(f"forward filter row became identically zero at t={t}")
