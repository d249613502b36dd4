"""Flow matching with an importance-weighted loss, on a toy per-cell denoiser.

Latents are average-pooled videos ``(F, h, w, c)``; a batch stacks them on a
leading axis. Noise ``x0`` and data ``x1`` are joined by the straight path
``x_t = t*x1 + (1-t)*x0`` whose velocity is ``x1 - x0``. The loss is the
mean-square velocity error plus ``alpha`` times the same error restricted to
the critical-object mask::

    loss = mean((u - v)^2) + alpha * mean((mask * (u - v))^2)

Means run over all elements, so ``alpha`` does not depend on tensor size.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from awg import rng as rng_mod
from awg.errors import DimensionMismatch, DivergedError

log = logging.getLogger(__name__)

POOL_FACTOR = 4
HIDDEN = 16
LEARNING_RATE = 1e-2

VelocityField = Callable[[np.ndarray, float, Optional[np.ndarray]], np.ndarray]


def avg_pool(video: np.ndarray, k: int = POOL_FACTOR) -> np.ndarray:
    """Average-pool the two spatial axes of ``(..., H, W, C)`` by ``k``; remainders are dropped."""
    video = np.asarray(video, dtype=np.float64)
    *lead, h, w, c = video.shape
    hh, ww = h // k, w // k
    if hh < 1 or ww < 1:
        raise DimensionMismatch(f"spatial size {h}x{w} is smaller than pool factor {k}")
    trimmed = video[..., : hh * k, : ww * k, :]
    return trimmed.reshape(*lead, hh, k, ww, k, c).mean(axis=(-4, -2))


def pool_mask(mask: np.ndarray, k: int = POOL_FACTOR) -> np.ndarray:
    """Map a ``(..., H, W)`` binary mask to latent resolution: area fraction >= 0.5."""
    area = avg_pool(np.asarray(mask, dtype=np.float64)[..., None], k)[..., 0]
    return (area >= 0.5).astype(np.float64)


def upsample(latent: np.ndarray, k: int = POOL_FACTOR) -> np.ndarray:
    """Nearest-neighbour inverse of :func:`avg_pool` for piecewise-constant images."""
    return np.repeat(np.repeat(latent, k, axis=-3), k, axis=-2)


def _check_same(*arrays: np.ndarray) -> None:
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise DimensionMismatch(f"shape mismatch: {sorted(shapes)}")


def interpolate(x1: np.ndarray, x0: np.ndarray, t: float) -> np.ndarray:
    _check_same(x1, x0)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return t * np.asarray(x1) + (1.0 - t) * np.asarray(x0)


def target_velocity(x1: np.ndarray, x0: np.ndarray) -> np.ndarray:
    _check_same(x1, x0)
    return np.asarray(x1) - np.asarray(x0)


def _broadcast_mask(mask: np.ndarray, like: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=like.dtype)
    if mask.shape == like.shape:
        return mask
    if mask.shape == like.shape[:-1]:
        return mask[..., None]
    raise DimensionMismatch(f"mask {mask.shape} does not match latent {like.shape}")


def weighted_loss(u: np.ndarray, v: np.ndarray, mask: np.ndarray, alpha: float = 1.0) -> float:
    """Importance-weighted velocity loss; ``alpha = 0`` gives plain MSE."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_same(u, v)
    diff = u - v
    m = _broadcast_mask(mask, diff)
    return float(np.mean(diff**2) + alpha * np.mean((m * diff) ** 2))


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")


@dataclass
class Batch:
    """Training batch; every array carries a leading batch axis."""

    x0: np.ndarray  # (B, F, h, w, c) noise
    x1: np.ndarray  # (B, F, h, w, c) data latents
    t: np.ndarray  # (B,)
    control: np.ndarray  # (B, F, h, w, cc)
    mask: np.ndarray  # (B, F, h, w)

    def __post_init__(self) -> None:
        _check_same(self.x0, self.x1)
        if self.control.shape[:-1] != self.x1.shape[:-1] or self.mask.shape != self.x1.shape[:-1]:
            raise DimensionMismatch("batch control/mask do not match latents")
        if self.t.shape != self.x1.shape[:1]:
            raise DimensionMismatch("one time value per batch element expected")


@dataclass
class ToyDenoiser:
    """Two-layer ReLU perceptron shared across latent cells.

    Each cell sees ``concat(x_t, control, t)`` and predicts ``c_latent``
    velocity channels. Parameters are one flat vector laid out as
    ``W1 (hidden, c_in) | b1 | W2 (c_out, hidden) | b2``.
    """

    c_latent: int
    c_control: int
    params: np.ndarray
    hidden: int = HIDDEN

    def __post_init__(self) -> None:
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (self.n_params,):
            raise DimensionMismatch(f"expected {self.n_params} parameters, got {self.params.shape}")

    @property
    def c_in(self) -> int:
        return self.c_latent + self.c_control + 1

    @property
    def c_out(self) -> int:
        return self.c_latent

    @property
    def n_params(self) -> int:
        return (self.c_in + 1) * self.hidden + (self.hidden + 1) * self.c_out

    @classmethod
    def initialize(cls, c_latent: int, c_control: int, seed: int, hidden: int = HIDDEN) -> "ToyDenoiser":
        """Weights uniform in +-1/sqrt(fan_in), biases zero."""
        c_in = c_latent + c_control + 1
        gen = rng_mod.stream(seed, "toy/init")
        w1 = gen.uniform(-1.0, 1.0, size=(hidden, c_in)) / math.sqrt(c_in)
        w2 = gen.uniform(-1.0, 1.0, size=(c_latent, hidden)) / math.sqrt(hidden)
        theta = np.concatenate([w1.ravel(), np.zeros(hidden), w2.ravel(), np.zeros(c_latent)])
        return cls(c_latent, c_control, theta, hidden)

    def with_params(self, params: np.ndarray) -> "ToyDenoiser":
        return ToyDenoiser(self.c_latent, self.c_control, params, self.hidden)

    def unpack(self, params: np.ndarray | None = None):
        p = self.params if params is None else params
        h, ci, co = self.hidden, self.c_in, self.c_out
        a = h * ci
        w1 = p[:a].reshape(h, ci)
        b1 = p[a : a + h]
        w2 = p[a + h : a + h + co * h].reshape(co, h)
        b2 = p[a + h + co * h :]
        return w1, b1, w2, b2

    def features(self, x: np.ndarray, t, control: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        control = np.asarray(control, dtype=np.float64)
        if control.shape[:-1] != x.shape[:-1] or control.shape[-1] != self.c_control:
            raise DimensionMismatch(f"control {control.shape} does not match latent {x.shape}")
        t = np.asarray(t, dtype=np.float64)
        # scalar t, or one value per leading batch element
        t_cells = np.broadcast_to(t.reshape(t.shape + (1,) * (x.ndim - t.ndim)), x.shape[:-1] + (1,))
        return np.concatenate([x, control, t_cells], axis=-1).reshape(-1, self.c_in)

    def __call__(self, x: np.ndarray, t, control: np.ndarray) -> np.ndarray:
        w1, b1, w2, b2 = self.unpack()
        hid = np.maximum(self.features(x, t, control) @ w1.T + b1, 0.0)
        return (hid @ w2.T + b2).reshape(np.shape(x))


def batch_loss(denoiser: ToyDenoiser, batch: Batch, cfg: LossConfig, params: np.ndarray | None = None) -> float:
    model = denoiser if params is None else denoiser.with_params(params)
    xt = interpolate_batch(batch)
    v = model(xt, batch.t, batch.control)
    return weighted_loss(target_velocity(batch.x1, batch.x0), v, batch.mask, cfg.alpha)


def interpolate_batch(batch: Batch) -> np.ndarray:
    t = batch.t.reshape((-1,) + (1,) * (batch.x1.ndim - 1))
    return t * batch.x1 + (1.0 - t) * batch.x0


def loss_and_gradient(denoiser: ToyDenoiser, batch: Batch, cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Loss and its exact gradient with respect to the flat parameter vector."""
    w1, b1, w2, b2 = denoiser.unpack()
    feats = denoiser.features(interpolate_batch(batch), batch.t, batch.control)
    pre = feats @ w1.T + b1
    hid = np.maximum(pre, 0.0)
    v = hid @ w2.T + b2

    u = (batch.x1 - batch.x0).reshape(-1, denoiser.c_out)
    m = np.asarray(batch.mask, dtype=np.float64).reshape(-1, 1)
    diff = u - v
    n = diff.size
    weight = 1.0 + cfg.alpha * m * m
    loss = float(np.sum(diff**2) / n + cfg.alpha * np.sum((m * diff) ** 2) / n)

    d_v = (-2.0 / n) * diff * weight
    g_w2 = d_v.T @ hid
    g_b2 = d_v.sum(axis=0)
    d_pre = (d_v @ w2) * (pre > 0.0)
    g_w1 = d_pre.T @ feats
    g_b1 = d_pre.sum(axis=0)
    grad = np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2])
    return loss, grad


def loss_gradient(denoiser: ToyDenoiser, batch: Batch, cfg: LossConfig) -> np.ndarray:
    return loss_and_gradient(denoiser, batch, cfg)[1]


@dataclass
class ToyDataset:
    """Latent training pairs: fused control, target latent and pooled object mask."""

    control: np.ndarray  # (S, F, h, w, cc)
    x1: np.ndarray  # (S, F, h, w, c)
    mask: np.ndarray  # (S, F, h, w)

    def __post_init__(self) -> None:
        self.control = np.asarray(self.control, dtype=np.float64)
        self.x1 = np.asarray(self.x1, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=np.float64)
        if self.control.shape[:-1] != self.x1.shape[:-1] or self.mask.shape != self.x1.shape[:-1]:
            raise DimensionMismatch("dataset arrays disagree in shape")

    def __len__(self) -> int:
        return self.x1.shape[0]

    def save(self, path: str | Path) -> None:
        np.savez_compressed(path, control=self.control, x1=self.x1, mask=self.mask)

    @classmethod
    def load(cls, path: str | Path) -> "ToyDataset":
        with np.load(path) as data:
            return cls(data["control"], data["x1"], data["mask"])


@dataclass
class TrainResult:
    denoiser: ToyDenoiser
    losses: list[float] = field(default_factory=list)


def learning_rate(step: int, steps: int, base: float = LEARNING_RATE) -> float:
    """Step size halved after every 40% of the run."""
    period = max(1, math.ceil(0.4 * steps))
    return base * 0.5 ** (step // period)


def draw_batch(dataset: ToyDataset, gen: np.random.Generator, batch_size: int | None = None) -> Batch:
    if batch_size is None or batch_size >= len(dataset):
        idx = np.arange(len(dataset))
    else:
        idx = np.sort(gen.choice(len(dataset), size=batch_size, replace=False))
    x1 = dataset.x1[idx]
    x0 = gen.standard_normal(x1.shape)
    t = gen.uniform(0.0, 1.0, size=len(idx))
    return Batch(x0, x1, t, dataset.control[idx], dataset.mask[idx])


def train_toy(
    dataset: ToyDataset,
    cfg: LossConfig,
    steps: int,
    seed: int,
    *,
    batch_size: int | None = None,
    lr: float = LEARNING_RATE,
    init: ToyDenoiser | None = None,
) -> TrainResult:
    """Plain gradient descent on the weighted loss.

    Raises DivergedError as soon as the loss stops being finite.
    """
    model = init or ToyDenoiser.initialize(dataset.x1.shape[-1], dataset.control.shape[-1], seed)
    params = model.params.copy()
    gen = rng_mod.stream(seed, "toy/train")
    losses: list[float] = []
    for step in range(steps):
        batch = draw_batch(dataset, gen, batch_size)
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad = loss_and_gradient(model.with_params(params), batch, cfg)
        if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
            raise DivergedError(f"non-finite loss at step {step}")
        losses.append(loss)
        params = params - learning_rate(step, steps, lr) * grad
        if step % 500 == 0:
            log.debug("step %d loss %.5f", step, loss)
    return TrainResult(model.with_params(params), losses)


def evaluate_loss(denoiser: ToyDenoiser, dataset: ToyDataset, cfg: LossConfig, seed: int, draws: int = 8) -> float:
    """Loss averaged over a fixed set of noise/time draws."""
    gen = rng_mod.stream(seed, "toy/eval-loss")
    return float(np.mean([batch_loss(denoiser, draw_batch(dataset, gen), cfg) for _ in range(draws)]))


def sample_euler(
    velocity: VelocityField,
    x0: np.ndarray,
    control: np.ndarray | None,
    n_steps: int,
    *,
    known: np.ndarray | None = None,
    known_frames: np.ndarray | None = None,
) -> np.ndarray:
    """Integrate ``dx/dt = velocity(x, t, control)`` from t=0 to 1 with Euler steps.

    ``known_frames`` (bool per frame, axis ``-4``) marks frames that are not
    sampled: before every step they are reset onto the straight path towards
    ``known``, and the result carries ``known`` for them exactly.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    x = np.array(x0, dtype=np.float64)
    noise = x.copy()
    keep = None
    if known_frames is not None:
        keep = np.asarray(known_frames, dtype=bool)
        known = np.asarray(known, dtype=np.float64)
        _check_same(known, x)
    dt = 1.0 / n_steps
    for k in range(n_steps):
        t = k / n_steps
        if keep is not None:
            x[..., keep, :, :, :] = t * known[..., keep, :, :, :] + (1.0 - t) * noise[..., keep, :, :, :]
        x = x + dt * velocity(x, t, control)
    if keep is not None:
        x[..., keep, :, :, :] = known[..., keep, :, :, :]
    return x


def reconstruction_errors(
    denoiser: ToyDenoiser, dataset: ToyDataset, n_steps: int, seed: int
) -> tuple[float, float]:
    """Mean squared error of samples against targets inside and outside the object mask."""
    x0 = rng_mod.stream(seed, "toy/recon").standard_normal(dataset.x1.shape)
    out = sample_euler(denoiser, x0, dataset.control, n_steps)
    sq = ((out - dataset.x1) ** 2).mean(axis=-1)
    inside = dataset.mask > 0.5
    masked = float(sq[inside].mean()) if inside.any() else 0.0
    unmasked = float(sq[~inside].mean()) if (~inside).any() else 0.0
    return masked, unmasked


def save_checkpoint(denoiser: ToyDenoiser, prefix: str | Path, *, pool_factor: int, alpha: float, seed: int) -> tuple[Path, Path]:
    """Write ``<prefix>.bin`` (little-endian float32 parameters) and ``<prefix>.json``."""
    prefix = Path(prefix)
    bin_path = prefix.with_suffix(".bin")
    meta_path = prefix.with_suffix(".json")
    bin_path.write_bytes(denoiser.params.astype("<f4").tobytes())
    meta = {
        "c_in": denoiser.c_in,
        "c_out": denoiser.c_out,
        "hidden": denoiser.hidden,
        "pool_factor": pool_factor,
        "alpha": alpha,
        "seed": seed,
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return bin_path, meta_path


def load_checkpoint(prefix: str | Path) -> tuple[ToyDenoiser, dict]:
    prefix = Path(prefix)
    meta = json.loads(prefix.with_suffix(".json").read_text())
    params = np.frombuffer(prefix.with_suffix(".bin").read_bytes(), dtype="<f4").astype(np.float64)
    c_out = meta["c_out"]
    c_control = meta["c_in"] - c_out - 1
    return ToyDenoiser(c_out, c_control, params, meta["hidden"]), meta


def write_loss_csv(losses: list[float], path: str | Path) -> None:
    lines = ["step,loss"] + [f"{i},{loss:.9g}" for i, loss in enumerate(losses)]
    Path(path).write_text("\n".join(lines) + "\n")
