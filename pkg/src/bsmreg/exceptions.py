"""Exception types raised across the package."""


class BSMError(Exception):
    """Base class for package errors."""


class DomainError(BSMError, ValueError):
    """An argument lies outside the domain of the operation."""


class EvaluationError(BSMError, ArithmeticError):
    """A numerical evaluation produced a non-finite value."""


class ConvergenceError(BSMError, RuntimeError):
    """An iterative procedure failed in a way that cannot be reported as a flag."""
