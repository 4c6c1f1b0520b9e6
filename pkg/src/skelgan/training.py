"""Joint training of the autoencoder and the conditional GAN.

Each step runs three updates in a fixed order:

1. autoencoder on frame reconstruction;
2. discriminator on real latent sequences (encoder output, gradient-stopped)
   against generator samples, ``d_steps_per_g`` times with fresh noise;
3. generator on the non-saturating adversarial loss plus the windowed
   consistency term.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from . import autodiff as ad
from . import checkpoint
from .data import Dataset, batches, fit_scale, normalize, resample, split_indices
from .model import (
    ModelBundle,
    ModelConfig,
    consistency_loss_windowed,
    d_loss_logits,
    discriminator_logits,
    encode_sequences,
    g_adv_loss_logits,
    generator_batch,
    recon_loss,
)
from .nn import Adam

log = logging.getLogger(__name__)

DEFAULT_LR = 1e-5


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = DEFAULT_LR
    batch_size: int = 64
    lam: float = 0.01
    z_dim: int = 16
    n: int = 8
    N: int = 32
    window: int = 8
    d_steps_per_g: int = 1
    seed: int = 0
    holdout: float = 0.2
    checkpoint_every: int = 0  # steps; 0 disables periodic checkpoints
    checkpoint_dir: str | None = None
    metrics_path: str | None = None
    max_steps: int | None = None

    def __post_init__(self):
        for name in ("epochs", "batch_size", "z_dim", "n", "N", "window", "d_steps_per_g"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if not 0.0 <= self.holdout < 1.0:
            raise ValueError("holdout fraction must lie in [0, 1)")

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(**raw)


@dataclass
class TrainMetrics:
    step: int
    recon: float
    d_loss: float
    g_adv: float
    consistency: float
    d_real: float
    d_fake: float

    def is_finite(self) -> bool:
        return all(np.isfinite(v) for v in asdict(self).values())


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass
class Optimizers:
    autoencoder: Adam
    discriminator: Adam
    generator: Adam

    @classmethod
    def for_bundle(cls, b: ModelBundle, lr: float) -> "Optimizers":
        return cls(
            Adam(b.encoder.parameters() + b.decoder.parameters(), lr=lr),
            Adam(b.discriminator.parameters(), lr=lr),
            Adam(b.generator.parameters(), lr=lr),
        )

    def as_dict(self) -> dict[str, Adam]:
        return {"autoencoder": self.autoencoder, "discriminator": self.discriminator, "generator": self.generator}


def sample_z(M: int, z_dim: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. standard normal noise, ``(M, z_dim)``."""
    return rng.standard_normal((M, z_dim))


def train_step(
    bundle: ModelBundle,
    frames: np.ndarray,
    onehot: np.ndarray,
    opts: Optimizers,
    lam: float,
    window: int,
    rng: np.random.Generator,
    d_steps_per_g: int = 1,
    step: int = 0,
) -> TrainMetrics:
    cfg = bundle.config
    M, N, d = frames.shape
    if (N, d) != (cfg.N, cfg.d) or onehot.shape != (M, cfg.K):
        raise ValueError(f"batch shapes {frames.shape}, {onehot.shape} do not match model config")

    # (1) autoencoder
    opts.autoencoder.zero_grad()
    rl = recon_loss(bundle, frames.reshape(M * N, d))
    rl.backward()
    opts.autoencoder.step()

    # (2) discriminator; real codes are constants here, so the encoder is untouched
    real = encode_sequences(bundle, frames).data
    c = real[:, 0, :]
    for _ in range(d_steps_per_g):
        fake = generator_batch(bundle, sample_z(M, cfg.z_dim, rng), c, onehot).data
        opts.discriminator.zero_grad()
        a_real = discriminator_logits(bundle, real, c, onehot)
        a_fake = discriminator_logits(bundle, fake, c, onehot)
        dl = d_loss_logits(a_real, a_fake)
        dl.backward()
        opts.discriminator.step()

    # (3) generator
    S = int(rng.integers(0, N - window + 1))
    opts.generator.zero_grad()
    fake_t = generator_batch(bundle, sample_z(M, cfg.z_dim, rng), c, onehot)
    a_fake_g = discriminator_logits(bundle, fake_t, c, onehot)
    adv = g_adv_loss_logits(a_fake_g)
    cons = consistency_loss_windowed(fake_t, S, window)
    total = ad.add(adv, ad.scale(cons, lam)) if lam else adv
    total.backward()
    opts.generator.step()
    # generator backward leaves stale grads on D; they are cleared before D's next use
    opts.discriminator.zero_grad()

    m = TrainMetrics(
        step=step,
        recon=rl.item(),
        d_loss=dl.item(),
        g_adv=adv.item(),
        consistency=cons.item(),
        d_real=float(np.mean(1.0 / (1.0 + np.exp(-a_real.data)))),
        d_fake=float(np.mean(1.0 / (1.0 + np.exp(-a_fake.data)))),
    )
    if not m.is_finite() or not bundle.is_finite():
        raise TrainingDiverged(f"non-finite loss or parameter at step {step}", asdict(m))
    return m


@dataclass
class PreparedData:
    X: np.ndarray  # (S, N, d) normalized
    y: np.ndarray
    train_idx: np.ndarray
    held_idx: np.ndarray
    scale: float
    classes: int
    joints: int
    dims: int

    @property
    def X_train(self) -> np.ndarray:
        return self.X[self.train_idx]

    @property
    def y_train(self) -> np.ndarray:
        return self.y[self.train_idx]

    @property
    def X_held(self) -> np.ndarray:
        return self.X[self.held_idx]

    @property
    def y_held(self) -> np.ndarray:
        return self.y[self.held_idx]


def prepare(dataset: Dataset, N: int, holdout: float, seed: int, scale: float | None = None) -> PreparedData:
    """Resample to ``N`` frames, split, fit the scale on the training part and normalize."""
    seqs = [resample(s, N) for s in dataset.sequences]
    y = np.array([s.label for s in seqs], dtype=np.int64)
    train_idx, held_idx = split_indices(y, holdout, seed)
    if scale is None:
        scale = fit_scale([seqs[i] for i in train_idx])
    X = np.stack([normalize(s, scale).flat() for s in seqs])
    return PreparedData(X, y, train_idx, held_idx, scale, dataset.classes, dataset.joints, dataset.dims)


def model_config_for(data: PreparedData, cfg: TrainConfig) -> ModelConfig:
    return ModelConfig(
        d=data.joints * data.dims,
        n=cfg.n,
        N=cfg.N,
        K=data.classes,
        z_dim=cfg.z_dim,
        lam=cfg.lam,
        L=min(cfg.window, cfg.N),
        M=cfg.batch_size,
    )


@dataclass
class TrainResult:
    bundle: ModelBundle
    history: list[TrainMetrics] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)
    optimizers: Optimizers | None = None
    data: PreparedData | None = None


def train(
    dataset: Dataset,
    cfg: TrainConfig,
    on_step: Callable[[TrainMetrics], None] | None = None,
) -> TrainResult:
    """Run the full training loop; the result depends only on ``(dataset, cfg)``."""
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    data = prepare(dataset, cfg.N, cfg.holdout, cfg.seed)
    mcfg = model_config_for(data, cfg)
    bundle = ModelBundle.build(mcfg, seed=cfg.seed)
    bundle.extras = {
        "scale": data.scale,
        "joints": data.joints,
        "dims": data.dims,
        "holdout": cfg.holdout,
        "split_seed": cfg.seed,
        "default_start": data.X_train[:, 0].mean(axis=0).tolist(),
        "train_config": {k: v for k, v in asdict(cfg).items() if k not in ("checkpoint_dir", "metrics_path")},
    }
    opts = Optimizers.for_bundle(bundle, cfg.lr)
    batch_rng = np.random.default_rng([cfg.seed, 1])
    noise_rng = np.random.default_rng([cfg.seed, 2])
    M = min(cfg.batch_size, len(data.train_idx))
    result = TrainResult(bundle, optimizers=opts, data=data)

    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    metrics_file = open(cfg.metrics_path, "w") if cfg.metrics_path else None
    try:
        step = 0
        for frames, onehot, _ in batches(data.X_train, data.y_train, M, data.classes, batch_rng, cfg.epochs):
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
            m = train_step(bundle, frames, onehot, opts, cfg.lam, mcfg.L, noise_rng, cfg.d_steps_per_g, step)
            result.history.append(m)
            step += 1
            if metrics_file:
                metrics_file.write(json.dumps(asdict(m)) + "\n")
            if on_step:
                on_step(m)
            if ckpt_dir and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                path = ckpt_dir / f"step-{step:07d}.ckpt"
                checkpoint.save(path, bundle, opts.as_dict())
                result.checkpoints.append(path)
        if ckpt_dir:
            path = ckpt_dir / "final.ckpt"
            checkpoint.save(path, bundle, opts.as_dict())
            result.checkpoints.append(path)
    finally:
        if metrics_file:
            metrics_file.close()
    log.info("trained %d steps", len(result.history))
    return result
