"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised when an input violates a documented precondition."""


class NumericFailure(ArithmeticError):
    """Raised when an iterative routine fails to converge."""
