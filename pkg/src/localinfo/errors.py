"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A parameter is outside its documented range."""


class DomainError(ValueError):
    """An input lies outside the domain of the operation."""


class UnsupportedOperationError(TypeError):
    """The operation is not defined for this input/object pairing."""


class BudgetError(RuntimeError):
    """An exact-enumeration budget would be exceeded."""


class ConfigurationError(RuntimeError):
    """A protocol configuration is infeasible (e.g. not enough players)."""
