"""PNG frame directories and dataset manifests.

A frame directory holds ``frame_00000.png`` ... ``frame_{n-1:05d}.png`` and
nothing else that matches ``frame_*.png``. Frames are 8-bit: grey (``L``)
for single-channel maps, RGB otherwise. Masks are stored as 0/255 and
binarized at 128 on load.

Manifest schema (version 1), paths relative to the manifest file::

    {
      "schema_version": 1,
      "entries": [
        {
          "id": "clip0",
          "frames_dir": "clip0/frames",
          "controls": {"depth_dir": ..., "lineart_dir": ..., "sketch_dir": ...},
          "masks": {"obj_dir": ..., "sky_dir": ...},
          "n_frames": 4, "width": 32, "height": 32
        }
      ]
    }
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from awg.control_fusion import ControlSet, SemanticMasks
from awg.errors import ManifestError

SCHEMA_VERSION = 1
FRAME_PATTERN = re.compile(r"frame_(\d{5})\.png$")
MASK_THRESHOLD = 128


def frame_name(index: int) -> str:
    return f"frame_{index:05d}.png"


def to_uint8(frame: np.ndarray) -> np.ndarray:
    arr = np.clip(np.asarray(frame, dtype=np.float64), 0.0, 1.0)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def save_png(frame: np.ndarray, path: str | Path) -> None:
    """Write a float frame in [0, 1] (or a uint8 array) as an 8-bit PNG."""
    arr = np.asarray(frame)
    if arr.dtype != np.uint8:
        arr = to_uint8(arr)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path, format="PNG")


def read_png_u8(path: str | Path) -> np.ndarray:
    """Raw 8-bit pixels: ``(H, W)`` for grey, ``(H, W, 3)`` for colour."""
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB" if img.mode in ("RGBA", "P", "CMYK") else "L")
        return np.array(img)


def load_png(path: str | Path, channels: int | None = None) -> np.ndarray:
    """Load as ``(H, W, C)`` float32 in [0, 1], optionally forcing 1 or 3 channels."""
    with Image.open(path) as img:
        if channels == 1:
            img = img.convert("L")
        elif channels == 3 or img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.float32) / 255.0
    return arr[:, :, None] if arr.ndim == 2 else arr


def load_mask_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return (arr >= MASK_THRESHOLD).astype(np.float32)


def frame_files(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    return sorted(p for p in directory.iterdir() if FRAME_PATTERN.match(p.name))


def write_frames(video, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(video):
        path = directory / frame_name(i)
        save_png(frame, path)
        paths.append(path)
    return paths


def read_frames(directory: str | Path, channels: int | None = None) -> np.ndarray:
    return np.stack([load_png(p, channels) for p in frame_files(directory)])


def read_masks(directory: str | Path) -> np.ndarray:
    return np.stack([load_mask_png(p) for p in frame_files(directory)])


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    frames_dir: Path
    depth_dir: Path
    lineart_dir: Path
    sketch_dir: Path
    obj_dir: Path
    sky_dir: Path
    n_frames: int
    width: int
    height: int

    def directories(self) -> dict[str, Path]:
        return {
            "frames_dir": self.frames_dir,
            "depth_dir": self.depth_dir,
            "lineart_dir": self.lineart_dir,
            "sketch_dir": self.sketch_dir,
            "obj_dir": self.obj_dir,
            "sky_dir": self.sky_dir,
        }

    def load_frames(self) -> np.ndarray:
        return read_frames(self.frames_dir, channels=3)

    def load_controls(self) -> ControlSet:
        return ControlSet(
            read_frames(self.depth_dir, channels=1),
            read_frames(self.lineart_dir, channels=1),
            read_frames(self.sketch_dir, channels=1),
        )

    def load_masks(self) -> SemanticMasks:
        return SemanticMasks(read_masks(self.obj_dir), read_masks(self.sky_dir))


@dataclass(frozen=True)
class Manifest:
    path: Path
    entries: tuple[ManifestEntry, ...]

    def entry(self, entry_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise ManifestError(f"no entry {entry_id!r} in {self.path}")


def _problems_for_dir(label: str, directory: Path, n_frames: int, size: tuple[int, int]) -> list[str]:
    if not directory.is_dir():
        return [f"{label}: missing directory {directory}"]
    files = frame_files(directory)
    expected = [frame_name(i) for i in range(n_frames)]
    if [p.name for p in files] != expected:
        return [f"{label}: expected {n_frames} files frame_00000.png..; found {len(files)}"]
    problems = []
    for p in files:
        try:
            with Image.open(p) as img:
                if img.size != size:
                    problems.append(f"{label}: {p.name} is {img.size[0]}x{img.size[1]}, expected {size[0]}x{size[1]}")
                    break
        except OSError as exc:
            problems.append(f"{label}: cannot read {p.name}: {exc}")
            break
    return problems


def _parse_entry(raw: dict, base: Path, idx: int) -> ManifestEntry:
    where = f"entry {idx}"
    try:
        controls = raw["controls"]
        masks = raw["masks"]
        entry = ManifestEntry(
            id=str(raw["id"]),
            frames_dir=base / raw["frames_dir"],
            depth_dir=base / controls["depth_dir"],
            lineart_dir=base / controls["lineart_dir"],
            sketch_dir=base / controls["sketch_dir"],
            obj_dir=base / masks["obj_dir"],
            sky_dir=base / masks["sky_dir"],
            n_frames=int(raw["n_frames"]),
            width=int(raw["width"]),
            height=int(raw["height"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: malformed field {exc}") from exc
    if entry.n_frames < 1 or entry.width < 1 or entry.height < 1:
        raise ManifestError(f"{where}: n_frames, width and height must be positive")
    return entry


def load_manifest(path: str | Path, *, check_files: bool = True) -> Manifest:
    """Parse and fully validate a manifest; raises ManifestError listing every problem."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("schema_version") != SCHEMA_VERSION:
        raise ManifestError(f"{path}: schema_version must be {SCHEMA_VERSION}")
    raw_entries = payload.get("entries")
    if not isinstance(raw_entries, list) or not raw_entries:
        raise ManifestError(f"{path}: 'entries' must be a non-empty list")

    base = path.parent
    entries = tuple(_parse_entry(raw, base, i) for i, raw in enumerate(raw_entries))
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise ManifestError(f"{path}: duplicate entry ids")
    if check_files:
        problems = []
        for e in entries:
            for label, directory in e.directories().items():
                problems += [f"{e.id}: {msg}" for msg in _problems_for_dir(label, directory, e.n_frames, (e.width, e.height))]
        if problems:
            raise ManifestError("; ".join(problems))
    return Manifest(path, entries)


def write_manifest(path: str | Path, entries: list[dict]) -> None:
    payload = {"schema_version": SCHEMA_VERSION, "entries": entries}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
