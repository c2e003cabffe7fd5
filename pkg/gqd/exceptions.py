class GQDError(Exception):
    """Base class for every error raised by the gqd package."""


class DomainError(GQDError, ValueError):
    """An input violates the documented preconditions."""


class NumericError(GQDError, ArithmeticError):
    """A numerical routine failed or produced an invalid result."""


class FitError(NumericError):
    def __init__(self, message, condition_number=None):
        super().__init__(message, condition_number)
        self.message = message
        self.condition_number = condition_number

    def __str__(self):
        if self.condition_number is None:
            return self.message
        return f"{self.message} (jacobian condition number {self.condition_number:.3e})"


class SweepError(NumericError):
    """A grid point of a field sweep failed; ``field`` names the failing h."""

    def __init__(self, field, reason):
        super().__init__(field, reason)
        self.field = field
        self.reason = reason

    def __str__(self):
        return f"sweep failed at h={self.field!r}: {self.reason}"
