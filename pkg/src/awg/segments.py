"""Segment-wise generation of videos longer than one model window.

Training draws one of two frame masks per clip: everything generated (first
segment) or everything but frame 0 (continuation). At inference the first
segment is generated freely and each following segment keeps its frame 0
fixed to the last frame of the previous segment, so consecutive segments
overlap by exactly one frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from awg import rng as rng_mod
from awg.errors import DimensionMismatch, InvalidLength
from awg.flow_matching import ToyDenoiser, sample_euler

SEGMENT_LEN = 45
P_FIRST_FRAME = 0.5

# (control, frame_mask, cond, index) -> segment frames; cond is None for segment 0
Sampler = Callable[[np.ndarray, np.ndarray, Optional[np.ndarray], int], np.ndarray]


def all_generate_mask(length: int) -> np.ndarray:
    return np.ones(length, dtype=np.int8)


def keep_first_mask(length: int) -> np.ndarray:
    mask = np.ones(length, dtype=np.int8)
    mask[0] = 0
    return mask


def draw_training_mask(
    gen: np.random.Generator, p_first_frame: float = P_FIRST_FRAME, length: int = SEGMENT_LEN
) -> np.ndarray:
    """1 marks a frame to generate, 0 a frame kept as conditioning."""
    if not 0.0 <= p_first_frame <= 1.0:
        raise ValueError(f"p_first_frame must lie in [0, 1], got {p_first_frame}")
    if gen.random() < p_first_frame:
        return keep_first_mask(length)
    return all_generate_mask(length)


@dataclass(frozen=True)
class Segment:
    index: int
    start: int
    frame_mask: tuple[int, ...]
    cond_source: int | None
    """Global index of the frame this segment is conditioned on."""


@dataclass(frozen=True)
class SegmentPlan:
    total_frames: int
    segment_len: int
    segments: tuple[Segment, ...]

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def generated_frames(self) -> int:
        return self.segment_len + (self.n_segments - 1) * (self.segment_len - 1)

    def to_json(self) -> str:
        payload = {
            "schema_version": 1,
            "total_frames": self.total_frames,
            "segment_len": self.segment_len,
            "n_segments": self.n_segments,
            "segments": [
                {
                    "index": s.index,
                    "start": s.start,
                    "frame_mask": list(s.frame_mask),
                    "cond_source": s.cond_source,
                }
                for s in self.segments
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SegmentPlan":
        payload = json.loads(text)
        segments = tuple(
            Segment(s["index"], s["start"], tuple(s["frame_mask"]), s["cond_source"])
            for s in payload["segments"]
        )
        return cls(payload["total_frames"], payload["segment_len"], segments)


def plan_segments(total_frames: int, segment_len: int = SEGMENT_LEN) -> SegmentPlan:
    """Fewest one-frame-overlapping segments covering ``total_frames``."""
    if segment_len < 2 or total_frames < segment_len:
        raise InvalidLength(
            f"need total_frames >= segment_len >= 2, got total={total_frames}, len={segment_len}"
        )
    stride = segment_len - 1
    n = 1 + math.ceil((total_frames - segment_len) / stride)
    segments = [Segment(0, 0, tuple(all_generate_mask(segment_len).tolist()), None)]
    for k in range(1, n):
        start = k * stride
        segments.append(Segment(k, start, tuple(keep_first_mask(segment_len).tolist()), start))
    return SegmentPlan(total_frames, segment_len, tuple(segments))


def _window(video: np.ndarray, start: int, length: int) -> np.ndarray:
    chunk = video[start : start + length]
    if len(chunk) < length:
        # the last segment may run past the end; repeat the final control frame
        pad = np.repeat(video[-1:], length - len(chunk), axis=0)
        chunk = np.concatenate([chunk, pad], axis=0)
    return chunk


def generate_long(sampler: Sampler, controls: np.ndarray, plan: SegmentPlan) -> np.ndarray:
    """Run ``sampler`` segment by segment and stitch the results.

    Kept frames are written back after every sampler call, so the frame shared
    by two segments is bit-identical in both.
    """
    controls = np.asarray(controls)
    if len(controls) < plan.total_frames:
        raise DimensionMismatch(f"controls cover {len(controls)} frames, plan needs {plan.total_frames}")
    length = plan.segment_len
    out: np.ndarray | None = None
    for seg in plan.segments:
        ctrl = _window(controls, seg.start, length)
        frame_mask = np.asarray(seg.frame_mask, dtype=np.int8)
        cond = None
        if seg.cond_source is not None:
            cond = np.zeros((length,) + out.shape[1:], dtype=out.dtype)
            cond[frame_mask == 0] = out[seg.cond_source]
        frames = np.array(sampler(ctrl, frame_mask, cond, seg.index))
        if frames.shape[0] != length:
            raise DimensionMismatch(f"sampler returned {frames.shape[0]} frames, expected {length}")
        if cond is not None:
            frames[frame_mask == 0] = cond[frame_mask == 0]
        if out is None:
            out = np.zeros((plan.generated_frames,) + frames.shape[1:], dtype=frames.dtype)
        out[seg.start : seg.start + length] = frames
    return out[: plan.total_frames]


def latent_sampler(denoiser: ToyDenoiser, n_steps: int, seed: int) -> Sampler:
    """Euler sampler over latent segments with hard-injected conditioning frames."""

    def run(control: np.ndarray, frame_mask: np.ndarray, cond: np.ndarray | None, index: int) -> np.ndarray:
        shape = control.shape[:-1] + (denoiser.c_out,)
        x0 = rng_mod.stream(seed, f"sample/segment{index}").standard_normal(shape)
        if cond is None:
            return sample_euler(denoiser, x0, control, n_steps)
        return sample_euler(denoiser, x0, control, n_steps, known=cond, known_frames=frame_mask == 0)

    return run
