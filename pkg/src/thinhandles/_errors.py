"""Exception types shared by all modules."""


class HandleError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HandleError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(HandleError, ValueError):
    """An argument is valid mathematically but outside the supported numeric range."""

    def __init__(self, message, *, parameter=None, value=None, limit=None):
        super().__init__(message)
        self.parameter = parameter
        self.value = value
        self.limit = limit


class NumericalError(HandleError, ArithmeticError):
    """A numerical procedure failed to reach its accuracy target."""

    def __init__(self, message, *, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ValidationError(HandleError, ValueError):
    """A configuration field failed validation; ``field`` names the culprit."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
