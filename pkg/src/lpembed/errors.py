"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class PreconditionError(ValueError):
    """A documented precondition (e.g. a passing certificate) does not hold."""


class OperatorFormatError(ValueError):
    """An operator file is malformed; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class SolverError(RuntimeError):
    """The decoder could not produce a feasible point."""
