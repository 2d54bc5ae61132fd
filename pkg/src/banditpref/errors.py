"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration or instance."""


class DomainError(ValueError):
    """An argument lies outside the domain of a mathematical operation."""


class NumericError(ArithmeticError):
    """A numerical routine failed (divergence, non-convergence, underflow)."""
