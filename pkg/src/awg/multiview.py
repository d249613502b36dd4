"""Tile synchronized camera frames into one composite grid and split it back.

The default layout is 2x3: front row FRONT_LEFT, FRONT, FRONT_RIGHT and back
row BACK_LEFT, BACK, BACK_RIGHT, each read left to right. Control maps and
masks are tiled with the same layout so every pixel lands at the same
composite coordinate as its image pixel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from awg.errors import DimensionMismatch, LayoutMismatch

DEFAULT_CAMERAS = ("FRONT_LEFT", "FRONT", "FRONT_RIGHT", "BACK_LEFT", "BACK", "BACK_RIGHT")


@dataclass(frozen=True)
class CameraLayout:
    rows: int = 2
    cols: int = 3
    labels: tuple[str, ...] = DEFAULT_CAMERAS

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise LayoutMismatch(f"layout must be at least 1x1, got {self.rows}x{self.cols}")
        if len(self.labels) != self.rows * self.cols:
            raise LayoutMismatch(f"{self.rows}x{self.cols} layout needs {self.rows * self.cols} labels")
        if len(set(self.labels)) != len(self.labels):
            raise LayoutMismatch("camera labels must be unique")

    @classmethod
    def parse(cls, text: str, labels: Sequence[str] | None = None) -> "CameraLayout":
        """Build a layout from ``"RxC"`` and optional labels (default CAM0, CAM1, ...)."""
        try:
            rows, cols = (int(part) for part in text.lower().split("x"))
        except ValueError as exc:
            raise LayoutMismatch(f"layout must look like RxC, got {text!r}") from exc
        if labels is None:
            labels = DEFAULT_CAMERAS if (rows, cols) == (2, 3) else [f"CAM{i}" for i in range(rows * cols)]
        return cls(rows, cols, tuple(labels))

    def cell(self, label: str) -> tuple[int, int]:
        i = self.labels.index(label)
        return divmod(i, self.cols)


def stitch(frames: Sequence[np.ndarray], layout: CameraLayout, *, channels: bool = True) -> np.ndarray:
    """Composite of shape ``(rows*H, cols*W, C)``; camera i fills cell ``divmod(i, cols)``.

    Works unchanged on leading axes, e.g. ``(F, H, W, C)`` videos. Pass
    ``channels=False`` for arrays without a channel axis such as ``(F, H, W)`` masks.
    """
    if len(frames) != len(layout.labels):
        raise LayoutMismatch(f"got {len(frames)} cameras for a {layout.rows}x{layout.cols} layout")
    arrays = [np.asarray(f) for f in frames]
    if len({(a.shape, a.dtype) for a in arrays}) != 1:
        raise DimensionMismatch("all camera frames must share shape and dtype")
    spatial = -3 if channels else -2
    rows = [
        np.concatenate(arrays[r * layout.cols : (r + 1) * layout.cols], axis=spatial + 1)
        for r in range(layout.rows)
    ]
    return np.concatenate(rows, axis=spatial)


def unstitch(composite: np.ndarray, layout: CameraLayout, *, channels: bool = True) -> list[np.ndarray]:
    """Exact inverse of :func:`stitch`, cameras in layout order."""
    composite = np.asarray(composite)
    spatial = -3 if channels else -2
    height, width = composite.shape[spatial], composite.shape[spatial + 1]
    if height % layout.rows or width % layout.cols:
        raise DimensionMismatch(f"composite {height}x{width} is not divisible by {layout.rows}x{layout.cols}")
    h, w = height // layout.rows, width // layout.cols
    out = []
    for i in range(len(layout.labels)):
        r, c = divmod(i, layout.cols)
        index = [slice(None)] * composite.ndim
        index[spatial] = slice(r * h, (r + 1) * h)
        index[spatial + 1] = slice(c * w, (c + 1) * w)
        out.append(composite[tuple(index)].copy())
    return out
