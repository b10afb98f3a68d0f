"""Exception types shared across the toolkit."""


class SdrcnnError(Exception):
    """Base class for all toolkit errors."""


class ShapeMismatchError(SdrcnnError, ValueError):
    """Operands have incompatible shapes; the message names both."""


class DegenerateInputError(SdrcnnError, ValueError):
    """Input is numerically degenerate for the requested operation."""


class NonFiniteValueError(SdrcnnError, ArithmeticError):
    """A computation produced NaN or Inf."""


class RasterFormatError(SdrcnnError, ValueError):
    """A raster container file is malformed or truncated."""


class ConfigError(SdrcnnError, ValueError):
    """A configuration value is missing, malformed, or out of range."""


class TrainingDivergedError(SdrcnnError, RuntimeError):
    """Training produced a non-finite loss; the message names the iteration."""


def require_same_shape(a_shape, b_shape, what="operands"):
    if tuple(a_shape) != tuple(b_shape):
        raise ShapeMismatchError(
            f"{what} must have identical shapes, got {tuple(a_shape)} and {tuple(b_shape)}"
        )
