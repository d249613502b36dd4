"""Weather-transfer data mechanisms: VP-anchored pseudo-video synthesis,
mask-guided control fusion, importance-weighted flow matching on a toy
denoiser, segment scheduling for long videos and multi-camera stitching."""

from awg.errors import (
    AwgError,
    DimensionMismatch,
    DivergedError,
    InfeasibleConfig,
    InvalidLength,
    LayoutMismatch,
    ManifestError,
    OutOfBounds,
)

__version__ = "0.1.0"

__all__ = [
    "AwgError",
    "DimensionMismatch",
    "DivergedError",
    "InfeasibleConfig",
    "InvalidLength",
    "LayoutMismatch",
    "ManifestError",
    "OutOfBounds",
    "__version__",
]
