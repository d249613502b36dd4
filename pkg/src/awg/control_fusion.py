"""Region-aware fusion of depth, lineart and sketch control maps.

The fused control keeps depth everywhere, lineart only on critical objects
(people, vehicles, traffic lights and signs) and sketch everywhere except
the sky::

    fused = concat(depth, lineart * obj_mask, sketch * (1 - sky_mask))

Channel order is fixed: 0 = depth, 1 = masked lineart, 2 = masked sketch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from awg.errors import DimensionMismatch
from awg.media import DTYPE, as_mask, as_video, hadamard, sobel

LINEART_THRESHOLD = 0.2
_SOBEL_MAX = 4.0 * np.sqrt(2.0)


@dataclass(frozen=True)
class ControlSet:
    """Single-channel control videos, each ``(F, H, W, 1)``."""

    depth: np.ndarray
    lineart: np.ndarray
    sketch: np.ndarray

    def __post_init__(self) -> None:
        shapes = {name: as_video(getattr(self, name)).shape for name in ("depth", "lineart", "sketch")}
        if len(set(shapes.values())) != 1 or next(iter(shapes.values()))[3] != 1:
            raise DimensionMismatch(f"control maps must be identical single-channel videos: {shapes}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return as_video(self.depth).shape[:3]


@dataclass(frozen=True)
class SemanticMasks:
    obj: np.ndarray
    sky: np.ndarray

    def __post_init__(self) -> None:
        if as_mask(self.obj).shape != as_mask(self.sky).shape:
            raise DimensionMismatch("object and sky masks differ in shape")


def fuse(controls: ControlSet, masks: SemanticMasks) -> np.ndarray:
    """Return the ``(F, H, W, 3)`` fused control video."""
    obj = as_mask(masks.obj)
    sky = as_mask(masks.sky)
    if obj.shape != controls.shape:
        raise DimensionMismatch(f"masks {obj.shape} do not match controls {controls.shape}")
    return np.concatenate(
        [
            as_video(controls.depth),
            hadamard(controls.lineart, obj),
            hadamard(controls.sketch, 1.0 - sky),
        ],
        axis=3,
    )


def _box_blur(gray: np.ndarray, radius: int) -> np.ndarray:
    k = 2 * radius + 1
    padded = np.pad(gray, radius, mode="edge")
    c = np.cumsum(np.pad(padded, ((1, 0), (0, 0))), axis=0)
    rows = (c[k:] - c[:-k]) / k
    c = np.cumsum(np.pad(rows, ((0, 0), (1, 0))), axis=1)
    return (c[:, k:] - c[:, :-k]) / k


def _thin_edges(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Non-maximum suppression along the quantized gradient direction."""
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    sector = (np.floor((angle + 22.5) / 45.0).astype(int)) % 4
    offsets = [(0, 1), (1, 1), (1, 0), (1, -1)]  # 0, 45, 90, 135 degrees as (dy, dx)
    p = np.pad(mag, 1, mode="constant")
    h, w = mag.shape
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dy, dx) in enumerate(offsets):
        fwd = p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        bwd = p[1 - dy : 1 - dy + h, 1 - dx : 1 - dx + w]
        # ties broken towards the lower-index side so a two-pixel ridge thins to one
        keep |= (sector == s) & (mag >= fwd) & (mag > bwd)
    return keep


def extract_controls_naive(video: np.ndarray) -> ControlSet:
    """Cheap deterministic stand-ins for learned depth/lineart/sketch extractors."""
    video = as_video(video)
    if video.shape[3] != 3:
        raise DimensionMismatch(f"expected an RGB video, got {video.shape[3]} channels")
    n, h, w, _ = video.shape
    radius = max(1, min(h, w) // 8)
    depth = np.empty((n, h, w, 1), dtype=DTYPE)
    lineart = np.empty_like(depth)
    sketch = np.empty_like(depth)
    for i, frame in enumerate(video.astype(np.float64)):
        gray = frame @ np.array([0.299, 0.587, 0.114])
        depth[i, :, :, 0] = np.clip(1.0 - _box_blur(gray, radius), 0.0, 1.0)
        gx, gy = sobel(gray)
        mag = np.clip(np.hypot(gx, gy) / _SOBEL_MAX, 0.0, 1.0)
        sketch[i, :, :, 0] = mag
        edges = _thin_edges(mag, gx, gy) & (mag >= LINEART_THRESHOLD)
        lineart[i, :, :, 0] = edges
    return ControlSet(depth, lineart, sketch)
