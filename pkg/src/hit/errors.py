class DimensionError(ValueError):
    """Operand extents are inconsistent with the operation."""


class BoxError(ValueError):
    """A box violates its ordering or positivity contract."""


class NonDifferentiableError(ValueError):
    """Gradient requested at a kink or a degenerate box."""


class WeightFormatError(ValueError):
    """Malformed weight file: bad magic, truncated blob, unknown name, shape mismatch."""
