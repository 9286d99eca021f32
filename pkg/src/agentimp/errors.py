class AgentImpError(Exception):
    """Base class for package errors."""


class ShapeError(AgentImpError, ValueError):
    pass


class NumericError(AgentImpError, ArithmeticError):
    """Non-finite values appeared where they are not allowed."""


class DataError(AgentImpError, ValueError):
    """Malformed scene, weight or report data."""


class ConfigError(AgentImpError, ValueError):
    pass
