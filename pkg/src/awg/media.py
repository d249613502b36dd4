"""Pixel containers and the geometry primitives every other module uses.

Arrays stand in for the container types:

* a frame is ``(H, W, C)`` float32 with values in [0, 1], C in {1, 3};
* a video is ``(F, H, W, C)`` with identical frames;
* a mask video is ``(F, H, W)`` holding exactly 0.0 or 1.0.

All functions are pure: inputs are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from awg.errors import DimensionMismatch, OutOfBounds

DTYPE = np.float32


@dataclass(frozen=True)
class Rect:
    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.x0 < 0 or self.y0 < 0 or self.w < 1 or self.h < 1:
            raise OutOfBounds(f"invalid rect {self}")

    def fits(self, width: int, height: int) -> bool:
        return self.x0 + self.w <= width and self.y0 + self.h <= height

    def translate(self, inner: "Rect") -> "Rect":
        """Express ``inner`` (relative to this rect) in this rect's parent frame."""
        if not inner.fits(self.w, self.h):
            raise OutOfBounds(f"{inner} does not fit inside {self}")
        return Rect(self.x0 + inner.x0, self.y0 + inner.y0, inner.w, inner.h)


def as_frame(data, *, copy: bool = False) -> np.ndarray:
    """Validate and coerce ``data`` into an ``(H, W, C)`` float32 frame."""
    arr = np.array(data, dtype=DTYPE) if copy else np.asarray(data, dtype=DTYPE)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3) or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"frame must be (H, W, 1|3), got {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("frame values must be finite and within [0, 1]")
    return arr


def as_video(data) -> np.ndarray:
    arr = np.asarray(data, dtype=DTYPE)
    if arr.ndim == 3:
        arr = arr[..., None]
    if arr.ndim != 4 or arr.shape[0] < 1 or arr.shape[3] not in (1, 3):
        raise DimensionMismatch(f"video must be (F, H, W, 1|3), got {arr.shape}")
    return arr


def as_mask(data) -> np.ndarray:
    """Coerce to an ``(F, H, W)`` binary mask video; a trailing unit channel is dropped."""
    arr = np.asarray(data, dtype=DTYPE)
    if arr.ndim == 4 and arr.shape[3] == 1:
        arr = arr[..., 0]
    if arr.ndim != 3:
        raise DimensionMismatch(f"mask video must be (F, H, W), got {arr.shape}")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError("mask values must be exactly 0 or 1")
    return arr


def crop(frame: np.ndarray, rect: Rect) -> np.ndarray:
    height, width = frame.shape[:2]
    if not rect.fits(width, height):
        raise OutOfBounds(f"{rect} exceeds frame {width}x{height}")
    return frame[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w].copy()


def _sample_positions(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centres, align_corners disabled
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = (pos - lo).astype(DTYPE)
    return lo, hi, frac


def resize_bilinear(frame: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize with half-pixel sampling; output stays inside the input's range."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output size must be positive, got {out_w}x{out_h}")
    src = np.asarray(frame, dtype=DTYPE)
    if src.ndim == 2:
        src = src[:, :, None]
    in_h, in_w = src.shape[:2]
    if (in_w, in_h) == (out_w, out_h):
        return src.copy()

    y_lo, y_hi, fy = _sample_positions(in_h, out_h)
    top = src[y_lo]
    rows = top + fy[:, None, None] * (src[y_hi] - top)
    x_lo, x_hi, fx = _sample_positions(in_w, out_w)
    left = rows[:, x_lo]
    out = left + fx[None, :, None] * (rows[:, x_hi] - left)

    lo = src.min(axis=(0, 1))
    hi = src.max(axis=(0, 1))
    out = np.clip(out, lo, hi)
    return np.clip(out, 0.0, 1.0).astype(DTYPE, copy=False)


def hadamard(video: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Multiply every channel of ``video`` by the per-pixel ``mask``."""
    video = as_video(video)
    mask = np.asarray(mask, dtype=DTYPE)
    if mask.ndim == 4 and mask.shape[3] == 1:
        mask = mask[..., 0]
    if mask.shape != video.shape[:3]:
        raise DimensionMismatch(f"mask {mask.shape} does not match video {video.shape[:3]}")
    return video * mask[..., None]


def sobel(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sobel derivatives with edge-replicated borders."""
    p = np.pad(gray, 1, mode="edge")
    gx = (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    gy = (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    return gx, gy
