"""Exception hierarchy shared by all modules."""


class DikinError(Exception):
    """Base class for errors raised by this package."""


class DomainError(DikinError, ValueError):
    """A point or parameter lies outside the domain of an operation."""


class NumericError(DikinError, ArithmeticError):
    """A numerical routine failed (e.g. a Cholesky factorization)."""


class ConfigError(DikinError, ValueError):
    """Missing or inconsistent configuration."""


class ConvergenceError(DikinError, RuntimeError):
    """An iterative method hit its iteration cap."""
