"""Exception hierarchy shared by all modules."""


class AwgError(Exception):
    """Base class for every error raised by this package."""


class OutOfBounds(AwgError, ValueError):
    pass


class DimensionMismatch(AwgError, ValueError):
    pass


class InfeasibleConfig(AwgError, ValueError):
    pass


class InvalidLength(AwgError, ValueError):
    pass


class LayoutMismatch(AwgError, ValueError):
    pass


class DivergedError(AwgError, FloatingPointError):
    pass


class ManifestError(AwgError, ValueError):
    """Raised when a dataset manifest violates its schema or invariants."""
