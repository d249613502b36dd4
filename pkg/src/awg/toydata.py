"""Synthetic road scenes for demos, fixtures and the toy training runs.

Each clip shows a sky band, a road with lane markings and one or two
coloured vehicles drifting sideways. The vehicles form the critical-object
mask and the sky band the sky mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from awg import rng as rng_mod
from awg.control_fusion import ControlSet, SemanticMasks, extract_controls_naive, fuse
from awg.flow_matching import POOL_FACTOR, ToyDataset, avg_pool, pool_mask
from awg.io import write_frames, write_manifest


@dataclass
class SceneClip:
    frames: np.ndarray  # (F, H, W, 3)
    controls: ControlSet
    masks: SemanticMasks

    @property
    def fused(self) -> np.ndarray:
        return fuse(self.controls, self.masks)


def make_scene(gen: np.random.Generator, n_frames: int = 4, size: int = 32) -> SceneClip:
    h = w = size
    horizon = int(gen.integers(size // 4, size // 2))
    frames = np.zeros((n_frames, h, w, 3), dtype=np.float32)
    obj = np.zeros((n_frames, h, w), dtype=np.float32)
    sky = np.zeros((n_frames, h, w), dtype=np.float32)

    sky_top = gen.uniform(0.55, 0.9, size=3)
    sky_bottom = np.clip(sky_top + gen.uniform(-0.2, 0.1, size=3), 0, 1)
    ramp = np.linspace(0.0, 1.0, horizon)[:, None]
    sky_rows = (1 - ramp) * sky_top + ramp * sky_bottom
    road = gen.uniform(0.2, 0.4)

    vehicles = []
    for _ in range(int(gen.integers(1, 3))):
        vw = int(gen.integers(size // 4, size // 2))
        vh = int(gen.integers(size // 5, size // 3))
        y = int(gen.integers(horizon, h - vh + 1))
        x = int(gen.integers(0, w - vw + 1))
        dx = int(gen.choice([-2, -1, 1, 2]))
        colour = gen.uniform(0.0, 1.0, size=3)
        colour[gen.integers(0, 3)] = gen.uniform(0.85, 1.0)
        vehicles.append((x, y, vw, vh, dx, colour))

    for f in range(n_frames):
        frame = frames[f]
        frame[:horizon] = sky_rows[:, None, :]
        frame[horizon:] = road
        frame[horizon:, w // 2 - 1 : w // 2 + 1] = 0.9  # lane marking
        sky[f, :horizon] = 1.0
        for x, y, vw, vh, dx, colour in vehicles:
            x_f = int(np.clip(x + dx * f, 0, w - vw))
            frame[y : y + vh, x_f : x_f + vw] = colour
            frame[y : y + max(1, vh // 3), x_f + 1 : x_f + vw - 1] = colour * 0.4  # windscreen
            obj[f, y : y + vh, x_f : x_f + vw] = 1.0
    frames = np.clip(frames, 0.0, 1.0)
    masks = SemanticMasks(obj, sky)
    return SceneClip(frames, extract_controls_naive(frames), masks)


def make_clips(seed: int, n_samples: int, n_frames: int = 4, size: int = 32) -> list[SceneClip]:
    gen = rng_mod.stream(seed, "toydata/scenes")
    return [make_scene(gen, n_frames, size) for _ in range(n_samples)]


def latent_dataset(clips: list[SceneClip], pool_factor: int = POOL_FACTOR) -> ToyDataset:
    return ToyDataset(
        control=np.stack([avg_pool(c.fused, pool_factor) for c in clips]),
        x1=np.stack([avg_pool(c.frames, pool_factor) for c in clips]),
        mask=np.stack([pool_mask(c.masks.obj, pool_factor) for c in clips]),
    )


def make_toy_dataset(seed: int = 0, n_samples: int = 50, n_frames: int = 4, latent: int = 8) -> ToyDataset:
    """The standard toy set: 50 clips of 4 frames, 8x8 latents."""
    return latent_dataset(make_clips(seed, n_samples, n_frames, latent * POOL_FACTOR))


def write_manifest_dataset(clips: list[SceneClip], root: str | Path, prefix: str = "clip") -> Path:
    """Write clips as PNG directories plus ``manifest.json``; returns the manifest path."""
    root = Path(root)
    entries = []
    for i, clip in enumerate(clips):
        name = f"{prefix}{i:03d}"
        dirs = {
            "frames_dir": f"{name}/frames",
            "depth_dir": f"{name}/depth",
            "lineart_dir": f"{name}/lineart",
            "sketch_dir": f"{name}/sketch",
            "obj_dir": f"{name}/mask_obj",
            "sky_dir": f"{name}/mask_sky",
        }
        write_frames(clip.frames, root / dirs["frames_dir"])
        write_frames(clip.controls.depth, root / dirs["depth_dir"])
        write_frames(clip.controls.lineart, root / dirs["lineart_dir"])
        write_frames(clip.controls.sketch, root / dirs["sketch_dir"])
        write_frames(clip.masks.obj, root / dirs["obj_dir"])
        write_frames(clip.masks.sky, root / dirs["sky_dir"])
        n, h, w, _ = clip.frames.shape
        entries.append(
            {
                "id": name,
                "frames_dir": dirs["frames_dir"],
                "controls": {k: dirs[k] for k in ("depth_dir", "lineart_dir", "sketch_dir")},
                "masks": {k: dirs[k] for k in ("obj_dir", "sky_dir")},
                "n_frames": n,
                "width": w,
                "height": h,
            }
        )
    manifest = root / "manifest.json"
    write_manifest(manifest, entries)
    return manifest
