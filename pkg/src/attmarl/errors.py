"""Exception taxonomy shared across the package."""


class AttMarlError(Exception):
    """Base class for all package errors."""


class ConfigError(AttMarlError):
    """Invalid configuration: bad dimensions, hyperparameters, or enum values."""


class ShapeError(ConfigError):
    """An array does not have the shape a contract requires."""


class UsageError(AttMarlError):
    """API lifecycle misuse (e.g. backward without a recorded forward)."""


class NumericsError(AttMarlError):
    """Non-finite values where finite ones are required."""


class ValidationError(AttMarlError):
    """A data file (topology, config) failed validation."""


class ContractError(AttMarlError):
    """A caller violated a runtime contract, e.g. an out-of-space action."""
