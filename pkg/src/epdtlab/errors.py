"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


class TruncationError(ArithmeticError):
    """A series or quadrature failed to reach the requested tolerance."""

    def __init__(self, message, partial_value=None, bound=None):
        super().__init__(message)
        self.partial_value = partial_value
        self.bound = bound


class NumericalFailure(RuntimeError):
    """A time integration produced non-finite values or could not proceed."""
