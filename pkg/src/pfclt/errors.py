"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Matrix dimension is unusable (e.g. odd size where an even one is required)."""


class ValidationError(ValueError):
    """Input violates a structural precondition (symmetry, ordering, ranges)."""


class SizeError(ValueError):
    """Request exceeds a hard size guard (combinatorial or dense-matrix blow-up)."""


class GridMismatchError(ValueError):
    """Two discrete operators do not live on the same quadrature grid."""


class NumericalError(RuntimeError):
    """A numerical routine failed; the message carries diagnostics."""


class InternalConsistencyError(RuntimeError):
    """Two independent computations of the same quantity disagree beyond tolerance."""


class UnsupportedKernelError(ValueError):
    """The requested kernel has no registered data for this operation."""
