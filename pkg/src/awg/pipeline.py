"""Batch pipelines behind the ``awg`` commands.

Each function validates all of its inputs before creating any output
directory, and produces byte-identical files when re-run with the same
inputs and seed.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from awg.control_fusion import fuse
from awg.errors import DimensionMismatch
from awg.flow_matching import (
    POOL_FACTOR,
    LossConfig,
    ToyDataset,
    avg_pool,
    load_checkpoint,
    pool_mask,
    save_checkpoint,
    train_toy,
    upsample,
    write_loss_csv,
)
from awg.io import (
    Manifest,
    ManifestEntry,
    frame_files,
    load_png,
    read_frames,
    read_masks,
    read_png_u8,
    save_png,
    write_frames,
)
from awg.multiview import CameraLayout, stitch, unstitch
from awg.segments import P_FIRST_FRAME, SEGMENT_LEN, generate_long, latent_sampler, plan_segments
from awg.vp_synthesis import SynthesisConfig, VanishingPoint, compute_crop_plan, estimate_vp_naive, synthesize_video

log = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint"


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = 1.0
    n_frames: int = 45
    final_w: int = 960
    final_h: int = 544
    pool_factor: int = POOL_FACTOR
    p_first_frame: float = P_FIRST_FRAME
    seed: int | None = None


def _dump_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def vp_synth(
    image_path: Path,
    out_dir: Path,
    cfg: PipelineConfig,
    vp: VanishingPoint | None = None,
) -> dict:
    image = load_png(image_path, channels=3)
    if vp is None:
        vp = estimate_vp_naive(image)
        log.info("estimated vanishing point (%.4f, %.4f)", vp.u, vp.v)
    synth = SynthesisConfig(cfg.n_frames, cfg.final_w, cfg.final_h)
    plan = compute_crop_plan(vp, image.shape[1], image.shape[0], synth)
    video = synthesize_video(image, plan, synth)
    write_frames(video, out_dir)
    (out_dir / "plan.json").write_text(plan.to_json() + "\n")
    return {"frames": len(video), "vp": [vp.u, vp.v], "clamped": sum(plan.clamped)}


def fused_controls(entry: ManifestEntry) -> np.ndarray:
    return fuse(entry.load_controls(), entry.load_masks())


def fuse_entry(entry: ManifestEntry, out_dir: Path) -> Path:
    target = out_dir / entry.id
    write_frames(fused_controls(entry), target)
    return target


def fuse_manifest(manifest: Manifest, out_dir: Path, entry_ids: Sequence[str] | None = None, jobs: int = 1) -> list[Path]:
    entries = [manifest.entry(i) for i in entry_ids] if entry_ids else list(manifest.entries)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(lambda e: fuse_entry(e, out_dir), entries))


def manifest_dataset(manifest: Manifest, pool_factor: int) -> ToyDataset:
    """One training sample per manifest entry, pooled to latent resolution."""
    shapes = {(e.n_frames, e.height, e.width) for e in manifest.entries}
    if len(shapes) != 1:
        raise DimensionMismatch(f"training entries must share frame count and size, got {sorted(shapes)}")
    controls, targets, masks = [], [], []
    for entry in manifest.entries:
        controls.append(avg_pool(fused_controls(entry), pool_factor))
        targets.append(avg_pool(entry.load_frames(), pool_factor))
        masks.append(pool_mask(entry.load_masks().obj, pool_factor))
    return ToyDataset(np.stack(controls), np.stack(targets), np.stack(masks))


def train(manifest: Manifest, out_dir: Path, cfg: PipelineConfig, steps: int) -> dict:
    dataset = manifest_dataset(manifest, cfg.pool_factor)
    result = train_toy(dataset, LossConfig(cfg.alpha), steps, cfg.seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.denoiser, out_dir / CHECKPOINT_NAME, pool_factor=cfg.pool_factor, alpha=cfg.alpha, seed=cfg.seed)
    write_loss_csv(result.losses, out_dir / "loss.csv")
    return {"steps": steps, "final_loss": result.losses[-1] if result.losses else None}


def _checkpoint_prefix(path: Path) -> Path:
    return path / CHECKPOINT_NAME if path.is_dir() else path.with_suffix("")


def sample(
    checkpoint: Path,
    entry: ManifestEntry,
    out_dir: Path,
    seed: int,
    *,
    total_frames: int | None = None,
    segment_len: int | None = None,
    n_steps: int = 8,
) -> str:
    """Generate frames for one entry; returns the segment plan as JSON."""
    model, meta = load_checkpoint(_checkpoint_prefix(checkpoint))
    k = meta["pool_factor"]
    controls = avg_pool(fused_controls(entry), k)
    total = total_frames or entry.n_frames
    if total > entry.n_frames:
        raise DimensionMismatch(f"entry {entry.id} has controls for {entry.n_frames} frames, asked for {total}")
    plan = plan_segments(total, segment_len or min(SEGMENT_LEN, total))
    latents = generate_long(latent_sampler(model, n_steps, seed), controls, plan)

    pixels = upsample(latents, k)
    pad_h = entry.height - pixels.shape[1]
    pad_w = entry.width - pixels.shape[2]
    pixels = np.pad(pixels, ((0, 0), (0, pad_h), (0, pad_w), (0, 0)), mode="edge")
    write_frames(np.clip(pixels, 0.0, 1.0), out_dir)
    plan_json = plan.to_json()
    (out_dir / "plan.json").write_text(plan_json + "\n")
    return plan_json


def _camera_frames(directories: Sequence[Path]) -> list[list[Path]]:
    per_cam = [frame_files(d) for d in directories]
    counts = {len(files) for files in per_cam}
    if len(counts) != 1 or 0 in counts:
        raise DimensionMismatch(f"camera directories hold differing or zero frame counts: {sorted(counts)}")
    return per_cam


def stitch_dirs(directories: Sequence[Path], layout: CameraLayout, out_dir: Path) -> int:
    per_cam = _camera_frames(directories)
    composites = [
        stitch([read_png_u8(p) for p in paths], layout, channels=read_png_u8(paths[0]).ndim == 3)
        for paths in zip(*per_cam)
    ]
    write_frames(composites, out_dir)
    return len(composites)


def unstitch_dir(directory: Path, layout: CameraLayout, out_dir: Path) -> dict[str, int]:
    files = frame_files(directory)
    if not files:
        raise DimensionMismatch(f"no frames in {directory}")
    per_frame = []
    for p in files:
        raw = read_png_u8(p)
        per_frame.append(unstitch(raw, layout, channels=raw.ndim == 3))
    for cam, label in enumerate(layout.labels):
        write_frames([views[cam] for views in per_frame], out_dir / label)
    return {label: len(files) for label in layout.labels}


def mask_fidelity(generated: np.ndarray, source: np.ndarray, mask: np.ndarray) -> dict:
    """Mean absolute error inside and outside the object mask (all channels)."""
    generated = np.asarray(generated, dtype=np.float64)
    source = np.asarray(source, dtype=np.float64)
    if generated.shape != source.shape or np.shape(mask) != generated.shape[:-1]:
        raise DimensionMismatch("generated, source and mask must align")
    err = np.abs(generated - source).mean(axis=-1)
    inside = np.asarray(mask) > 0.5
    return {
        "masked_mae": float(err[inside].mean()) if inside.any() else 0.0,
        "unmasked_mae": float(err[~inside].mean()) if (~inside).any() else 0.0,
        "masked_pixels": int(inside.sum()),
        "unmasked_pixels": int((~inside).sum()),
    }


def eval_mask_fidelity(gen_dir: Path, src_dir: Path, mask_dir: Path) -> dict:
    return mask_fidelity(read_frames(gen_dir, channels=3), read_frames(src_dir, channels=3), read_masks(mask_dir))
