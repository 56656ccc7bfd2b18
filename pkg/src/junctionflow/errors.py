"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a mathematical operation."""


class ContractError(ValueError):
    """Inputs violate a documented precondition between components."""


class ConfigError(ValueError):
    """A configuration, geometry or input file is unusable."""
