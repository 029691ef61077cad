"""Exception types shared across the package."""


class FlowSurrogateError(Exception):
    """Base class for all package errors."""


class ShapeError(FlowSurrogateError):
    """Array dimensions incompatible with the operation."""


class DomainError(FlowSurrogateError):
    """Value outside the mathematically valid domain."""


class UsageError(FlowSurrogateError):
    """Operation invoked in a state or with arguments its contract forbids."""


class ConfigError(FlowSurrogateError):
    """Invalid or inconsistent configuration."""


class TrainingError(FlowSurrogateError):
    """Numeric failure during optimization (non-finite loss or gradient)."""


class ContractError(FlowSurrogateError):
    """An internal invariant was violated by a caller or upstream component."""
