"""Exception hierarchy shared by all modules."""


class MmvError(Exception):
    """Base class for library errors."""


class NonPositiveVolatility(MmvError, ValueError):
    pass


class GridTooCoarse(MmvError, RuntimeError):
    pass


class NonPositiveF(MmvError, RuntimeError):
    """A Case I linear solution reached zero or below."""


class OutOfDomain(MmvError, ValueError):
    pass


class ExcessiveExcursion(MmvError, RuntimeError):
    """Too many simulated factor values left the PDE grid."""


class DegenerateER(MmvError, ValueError):
    """E[R_T] equals one, so the Lagrange multiplier is undefined."""


class DegenerateVariance(MmvError, ValueError):
    pass


class ConfigError(MmvError, ValueError):
    """Malformed run configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
