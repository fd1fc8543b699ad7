"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class DomainError(ValueError):
    """Argument outside its mathematical domain (e.g. negative rate, bad action)."""


class ShapeError(ValueError):
    """Array shapes do not line up."""


class NumericError(ArithmeticError):
    """Non-finite value produced where a finite one is required."""


class HorizonExceededError(RuntimeError):
    """Attempt to advance an episode past its final slot."""


class BudgetExceededError(RuntimeError):
    """Exact enumeration would exceed the configured budget; refusing to truncate."""
