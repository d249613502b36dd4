"""Turn one still image into a zoom-in pseudo-video anchored on its vanishing point.

The first crop is the largest rectangle with the target aspect ratio that fits
the source; crop widths then shrink linearly down to the final size. Each crop
is placed so the vanishing point keeps the normalized position it has inside
the first crop, then every crop is resized to the final resolution.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from awg.errors import InfeasibleConfig
from awg.media import Rect, crop, resize_bilinear, sobel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VanishingPoint:
    u: float
    v: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.u <= 1.0 and 0.0 <= self.v <= 1.0):
            raise ValueError(f"vanishing point must lie in [0, 1]^2, got ({self.u}, {self.v})")

    @classmethod
    def parse(cls, text: str) -> "VanishingPoint":
        u, v = (float(part) for part in text.split(","))
        return cls(u, v)


@dataclass(frozen=True)
class SynthesisConfig:
    n_frames: int = 45
    final_w: int = 960
    final_h: int = 544

    def __post_init__(self) -> None:
        if self.n_frames < 2:
            raise InfeasibleConfig(f"n_frames must be >= 2, got {self.n_frames}")
        if self.final_w < 1 or self.final_h < 1:
            raise InfeasibleConfig(f"final size must be positive, got {self.final_w}x{self.final_h}")


@dataclass
class CropPlan:
    rects: list[Rect]
    clamped: list[bool]
    src_w: int
    src_h: int
    vp_pixel: tuple[int, int]
    """Source pixel (column, row) holding the vanishing point."""
    anchor: tuple[float, float] = field(default=(0.5, 0.5))
    """Normalized VP position inside the first crop, kept for every later crop."""

    def __len__(self) -> int:
        return len(self.rects)

    def to_json(self) -> str:
        payload = {
            "schema_version": 1,
            "src_w": self.src_w,
            "src_h": self.src_h,
            "vp_pixel": list(self.vp_pixel),
            "anchor": list(self.anchor),
            "rects": [
                {"x0": r.x0, "y0": r.y0, "w": r.w, "h": r.h, "clamped": c}
                for r, c in zip(self.rects, self.clamped)
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def round_half_away(x) -> int:
    """Round to nearest integer, ties away from zero (works on floats and Fractions)."""
    if x >= 0:
        return int(math.floor(x + Fraction(1, 2)))
    return -int(math.floor(-x + Fraction(1, 2)))


def first_crop_size(src_w: int, src_h: int, final_w: int, final_h: int) -> tuple[int, int]:
    """Largest ``final_w:final_h`` rectangle fitting the source."""
    if src_w * final_h >= src_h * final_w:
        w = (src_h * final_w) // final_h
    else:
        w = src_w
    return w, round_half_away(Fraction(w * final_h, final_w))


def _place(center: Fraction, anchor: Fraction, extent: int, limit: int, pixel: int) -> tuple[int, bool]:
    offset = round_half_away(center - anchor * extent)
    wanted = offset
    # keep the VP pixel inside the crop, then inside the source
    offset = min(max(offset, pixel - extent + 1), pixel)
    offset = min(max(offset, 0), limit - extent)
    return offset, offset != wanted


def compute_crop_plan(vp: VanishingPoint, src_w: int, src_h: int, cfg: SynthesisConfig) -> CropPlan:
    if cfg.final_w > src_w or cfg.final_h > src_h:
        raise InfeasibleConfig(
            f"final crop {cfg.final_w}x{cfg.final_h} does not fit source {src_w}x{src_h}"
        )
    w0, h0 = first_crop_size(src_w, src_h, cfg.final_w, cfg.final_h)
    n = cfg.n_frames

    widths = [
        round_half_away(w0 + Fraction((cfg.final_w - w0) * i, n - 1)) for i in range(n)
    ]
    heights = [round_half_away(Fraction(w * cfg.final_h, cfg.final_w)) for w in widths]
    heights[0] = h0

    u = Fraction(vp.u)
    v = Fraction(vp.v)
    col = min(int(math.floor(u * src_w)), src_w - 1)
    row = min(int(math.floor(v * src_h)), src_h - 1)
    cx = Fraction(2 * col + 1, 2)
    cy = Fraction(2 * row + 1, 2)

    # the first crop slides over the free margin in proportion to the VP
    x0, x_flag = _place(u * src_w, u, w0, src_w, col)
    y0, y_flag = _place(v * src_h, v, h0, src_h, row)
    ax = (cx - x0) / w0
    ay = (cy - y0) / h0

    rects = [Rect(x0, y0, w0, h0)]
    clamped = [x_flag or y_flag]
    for w, h in zip(widths[1:], heights[1:]):
        x, cx_flag = _place(cx, ax, w, src_w, col)
        y, cy_flag = _place(cy, ay, h, src_h, row)
        rects.append(Rect(x, y, w, h))
        clamped.append(cx_flag or cy_flag)
    if any(clamped):
        log.debug("crop plan clamped %d of %d rects", sum(clamped), n)
    return CropPlan(rects, clamped, src_w, src_h, (col, row), (float(ax), float(ay)))


def synthesize_video(image: np.ndarray, plan: CropPlan, cfg: SynthesisConfig) -> np.ndarray:
    """Crop and resize every plan entry; frames ordered wide to narrow (zoom in)."""
    frames = [resize_bilinear(crop(image, rect), cfg.final_w, cfg.final_h) for rect in plan.rects]
    return np.stack(frames)


def _luminance(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    if image.shape[2] == 1:
        return image[:, :, 0]
    return image[:, :, :3] @ np.array([0.299, 0.587, 0.114])


def _hough_lines(
    gray: np.ndarray,
    n_theta: int = 180,
    edge_frac: float = 0.25,
    spread: int = 2,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Gradient-orientation Hough accumulator; returns (acc, thetas, rho_offset)."""
    gx, gy = sobel(gray)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    thetas = np.arange(n_theta) * (np.pi / n_theta)
    h, w = gray.shape
    diag = int(math.ceil(math.hypot(h, w)))
    acc = np.zeros((n_theta, 2 * diag + 1))
    if peak <= 1e-9:
        return acc, thetas, diag
    ys, xs = np.nonzero(mag >= edge_frac * peak)
    # gradient direction is the line normal
    normal = np.mod(np.arctan2(gy[ys, xs], gx[ys, xs]), np.pi)
    base = np.rint(normal / np.pi * n_theta).astype(int)
    px = xs + 0.5
    py = ys + 0.5
    for d in range(-spread, spread + 1):
        idx = np.mod(base + d, n_theta)
        rho = px * np.cos(thetas[idx]) + py * np.sin(thetas[idx])
        np.add.at(acc, (idx, np.rint(rho).astype(int) + diag), 1.0)
    return acc, thetas, diag


def _peaks(acc: np.ndarray, count: int, min_votes: float, theta_win: int, rho_win: int) -> list[tuple[int, int]]:
    acc = acc.copy()
    n_theta = acc.shape[0]
    found = []
    while len(found) < count:
        t, r = np.unravel_index(int(np.argmax(acc)), acc.shape)
        if acc[t, r] < min_votes:
            break
        found.append((t, r))
        for dt in range(-theta_win, theta_win + 1):
            tt = (t + dt) % n_theta
            # theta wraps at pi with rho changing sign
            rr = r if 0 <= t + dt < n_theta else acc.shape[1] - 1 - r
            acc[tt, max(rr - rho_win, 0) : rr + rho_win + 1] = 0.0
    return found


def estimate_vp_naive(image: np.ndarray, *, min_line_frac: float = 0.25) -> VanishingPoint:
    """Least-squares intersection of the dominant straight lines.

    Falls back to the image centre when fewer than two confident,
    non-parallel lines are found. A line is confident when it collects at
    least ``min_line_frac`` of the shorter image side in votes.
    """
    gray = _luminance(image)
    h, w = gray.shape
    acc, thetas, diag = _hough_lines(gray)
    min_votes = max(8.0, min_line_frac * min(h, w))
    peaks = _peaks(acc, count=6, min_votes=min_votes, theta_win=6, rho_win=6)
    lines = [(thetas[t], r - diag) for t, r in peaks]

    spread = max(
        (abs(math.sin(a - b)) for (a, _), (b, _) in itertools.combinations(lines, 2)),
        default=0.0,
    )
    if spread < math.sin(math.radians(8)):
        log.debug("vanishing point fallback: %d confident lines", len(lines))
        return VanishingPoint(0.5, 0.5)
    normals = np.array([[math.cos(t), math.sin(t)] for t, _ in lines])
    weights = np.array([acc[t, r] for t, r in peaks])
    rhos = np.array([rho for _, rho in lines], dtype=np.float64)
    sw = np.sqrt(weights)[:, None]
    point, *_ = np.linalg.lstsq(normals * sw, rhos * sw[:, 0], rcond=None)
    u = float(np.clip(point[0] / w, 0.0, 1.0))
    v = float(np.clip(point[1] / h, 0.0, 1.0))
    return VanishingPoint(u, v)
