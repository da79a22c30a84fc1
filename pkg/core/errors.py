"""
kernel error hierarchy

All errors derive from ValueError so callers that only know the standard
exception keep working.
"""


class KernelError(ValueError):
    """Base class for every error raised by the numeric core"""


class DimensionError(KernelError):
    """Shapes or extents are incompatible"""


class ArgumentError(KernelError):
    """A scalar argument is outside its legal range"""


class GeometryError(KernelError):
    """A neighborhood does not fit the axis it is applied to"""


class NonFiniteError(KernelError):
    """NaN or Inf reached an operation that rejects it"""


class StaleStateError(KernelError):
    """Saved forward state does not belong to the parameters given to backward"""
