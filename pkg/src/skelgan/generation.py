"""Generation phase: encode a start frame, run the generator, decode each latent frame."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ActionSequence, one_hot, one_hot_batch
from .model import ModelBundle, decode_latent, encode_frame, generator_batch, generator_forward


@dataclass
class GenerationRequest:
    initial: np.ndarray  # flat frame, normalized coordinates
    label: int
    z: np.ndarray | None = None
    seed: int = 0


@dataclass
class ChainRequest:
    initial: np.ndarray
    labels: list[int]
    zs: list[np.ndarray] | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.labels:
            raise ValueError("chain needs at least one label")
        if self.zs is not None and len(self.zs) != len(self.labels):
            raise ValueError("need one z per chained label")


@dataclass
class GeneratedSequence:
    frames: np.ndarray  # (N, d)
    latent: np.ndarray  # (N, n)
    label: int
    z: np.ndarray = field(repr=False, default=None)

    def to_action(self, joints: int, dims: int, source: str = "generated") -> ActionSequence:
        return ActionSequence(self.frames.reshape(len(self.frames), joints, dims), self.label, source)


def _check(bundle: ModelBundle, initial: np.ndarray, label: int) -> None:
    cfg = bundle.config
    if not bundle.is_finite():
        raise ValueError("bundle has non-finite parameters")
    if np.asarray(initial).shape != (cfg.d,):
        raise ValueError(f"initial frame must have {cfg.d} coordinates")
    if not 0 <= label < cfg.K:
        raise ValueError(f"label {label} out of range for {cfg.K} classes")


def generate(bundle: ModelBundle, req: GenerationRequest) -> GeneratedSequence:
    initial = np.asarray(req.initial, dtype=np.float64)
    _check(bundle, initial, req.label)
    z = req.z
    if z is None:
        z = np.random.default_rng(req.seed).standard_normal(bundle.config.z_dim)
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (bundle.config.z_dim,):
        raise ValueError(f"z must have {bundle.config.z_dim} entries")
    c = encode_frame(bundle, initial).data
    h = generator_forward(bundle, z, c, one_hot(req.label, bundle.config.K))
    frames = decode_latent(bundle, h.frames).data
    return GeneratedSequence(frames, h.frames.copy(), req.label, z)


def generate_batch(bundle: ModelBundle, initial: np.ndarray, labels, z: np.ndarray) -> np.ndarray:
    """Vectorised generation: ``(B, d)`` start frames, ``(B,)`` labels, ``(B, z_dim)`` noise
    to ``(B, N, d)`` decoded frames. Row ``i`` equals ``generate`` on row ``i``."""
    cfg = bundle.config
    initial = np.asarray(initial, dtype=np.float64)
    c = encode_frame(bundle, initial).data
    h = generator_batch(bundle, z, c, one_hot_batch(labels, cfg.K)).data
    B = h.shape[0]
    return decode_latent(bundle, h.reshape(B * cfg.N, cfg.n)).data.reshape(B, cfg.N, cfg.d)


def chain(bundle: ModelBundle, req: ChainRequest) -> list[GeneratedSequence]:
    """Consecutive actions; each segment starts from the previous segment's last decoded frame."""
    rng = np.random.default_rng(req.seed)
    out = []
    start = np.asarray(req.initial, dtype=np.float64)
    for k, label in enumerate(req.labels):
        z = req.zs[k] if req.zs is not None else rng.standard_normal(bundle.config.z_dim)
        seg = generate(bundle, GenerationRequest(start, label, z))
        out.append(seg)
        start = seg.frames[-1]
    return out
