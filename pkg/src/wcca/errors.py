"""Exception hierarchy shared by all modules."""


class WccaError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(WccaError, ValueError):
    """Input has the wrong shape, non-finite entries, or violates a precondition."""


class DimensionError(ValidationError):
    """Two inputs disagree in their dimensions."""


class ConstantColumnError(ValidationError):
    """A data column has zero sample variance."""

    def __init__(self, column, name=None):
        self.column = column
        self.name = name
        label = f"{column}" if name is None else f"{column} ({name!r})"
        super().__init__(f"column {label} has zero variance")


class InsufficientDataError(ValidationError):
    """Too few samples for the requested estimate."""


class SingularityError(WccaError, ArithmeticError):
    """A matrix that must be positive definite is (numerically) singular."""

    def __init__(self, message, eigenvalue=None):
        self.eigenvalue = eigenvalue
        super().__init__(message)
