"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Operands have incompatible shapes or ambient dimensions."""


class UnsupportedDimensionError(ValueError):
    """The requested dimension is outside an operation's documented range."""


class BoundVacuousError(ArithmeticError):
    """A closed-form bound is vacuous at these inputs (nonpositive denominator)."""


class NumericError(ArithmeticError):
    """Numerical breakdown (e.g. a determinant that should be positive is not)."""


class FitError(RuntimeError):
    """Every optimizer restart was discarded; no estimate is available."""


class ProtocolError(RuntimeError):
    """Agent select/observe calls arrived out of order."""


class GenerationError(RuntimeError):
    """Instance rejection sampling exhausted its budget."""


class ConfigError(ValueError):
    """A configuration file or block failed validation."""
