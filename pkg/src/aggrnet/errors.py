"""Exception types shared across the package."""


class AggrnetError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(AggrnetError, ValueError):
    pass


class InvalidParameterError(AggrnetError, ValueError):
    pass


class ConsistencyError(AggrnetError):
    """A probability table or derived quantity violates a basic identity."""


class TableSizeError(AggrnetError, MemoryError):
    pass


class InstabilityError(AggrnetError):
    """Requested quantity only exists for a stable (ergodic) system."""


class NoTrafficError(AggrnetError):
    """Mean delay is undefined because the arrival rate is zero."""


class NonConvergenceError(AggrnetError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = list(history) if history is not None else []


class BranchPointError(AggrnetError):
    pass


class ConfigError(AggrnetError, ValueError):
    pass
