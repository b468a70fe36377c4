"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class QldpError(Exception):
    exit_code = 1


class ValidationError(QldpError, ValueError):
    exit_code = 2


class CapacityError(ValidationError):
    """Requested operator dimension exceeds the configured cap."""


class InsufficientCopies(ValidationError):
    pass


class BudgetExceeded(QldpError):
    exit_code = 3


class NotTrivialEnough(QldpError):
    """A measurement is less trivial than the caller declared."""

    exit_code = 4


class MaxIterationsExceeded(QldpError):
    exit_code = 1
