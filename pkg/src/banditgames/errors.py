"""Exception types shared across the package."""


class UsageError(ValueError):
    """An argument is out of its documented range."""


class DomainError(ValueError):
    """A point lies outside the domain of the function being evaluated."""


class DegenerateRangeError(DomainError):
    """A cost range collapses to a single value."""


class NumericError(ArithmeticError):
    """Non-finite or singular quantities appeared during a computation."""


class UnsupportedError(NotImplementedError):
    """The object lacks a requested capability (e.g. an exact gradient)."""


class NonConvergenceError(RuntimeError):
    """An iterative solver exhausted its iteration budget."""


class InvariantViolation(AssertionError):
    """A property that the algorithm guarantees was observed to fail."""


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""
