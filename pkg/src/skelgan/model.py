"""Autoencoder + conditional GAN over latent frame sequences, and its losses.

Latent sequences are stored frame-major: a batch of sequences is an
``(M, N, n)`` array and the generator emits ``N*n`` values per sample that
reshape to ``(N, n)``. :class:`LatentSequence` exposes the ``n x N`` view
(one column per frame).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Mlp, forward, init_mlp


@dataclass(frozen=True)
class ModelConfig:
    d: int = 10
    n: int = 8
    N: int = 32
    K: int = 3
    z_dim: int = 16
    lam: float = 0.01
    L: int = 8
    M: int = 64
    encoder_hidden: tuple[int, ...] = (128, 64)
    decoder_hidden: tuple[int, ...] = (64, 128)
    generator_hidden: tuple[int, ...] = (256, 256)
    discriminator_hidden: tuple[int, ...] = (256, 128)

    def __post_init__(self):
        for name in ("d", "n", "N", "K", "z_dim", "L", "M"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 2 <= self.L <= self.N:
            raise ValueError(f"window length L={self.L} must lie in [2, N={self.N}]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        raw = dict(raw)
        for k in ("encoder_hidden", "decoder_hidden", "generator_hidden", "discriminator_hidden"):
            if k in raw:
                raw[k] = tuple(raw[k])
        return cls(**raw)


@dataclass
class LatentSequence:
    """``values`` is ``n x N``; column ``j`` is the code of frame ``j``."""

    values: np.ndarray

    @property
    def frames(self) -> np.ndarray:
        return self.values.T

    @classmethod
    def from_frames(cls, frames: np.ndarray) -> "LatentSequence":
        return cls(np.ascontiguousarray(np.asarray(frames, dtype=np.float64).T))


@dataclass
class ModelBundle:
    config: ModelConfig
    encoder: Mlp
    decoder: Mlp
    generator: Mlp
    discriminator: Mlp
    extras: dict = field(default_factory=dict)

    NETWORKS = ("encoder", "decoder", "generator", "discriminator")

    @classmethod
    def build(cls, config: ModelConfig, seed: int = 0) -> "ModelBundle":
        rng = np.random.default_rng(seed)
        c = config
        relus = lambda k: ["relu"] * k  # noqa: E731
        enc = init_mlp([c.d, *c.encoder_hidden, c.n], relus(len(c.encoder_hidden)) + ["tanh"], rng)
        dec = init_mlp([c.n, *c.decoder_hidden, c.d], relus(len(c.decoder_hidden)) + ["linear"], rng)
        gen = init_mlp(
            [c.z_dim + c.n + c.K, *c.generator_hidden, c.n * c.N],
            relus(len(c.generator_hidden)) + ["linear"],
            rng,
        )
        dis = init_mlp(
            [c.n * c.N + c.n + c.K, *c.discriminator_hidden, 1],
            relus(len(c.discriminator_hidden)) + ["sigmoid"],
            rng,
        )
        return cls(config, enc, dec, gen, dis)

    def network(self, name: str) -> Mlp:
        if name not in self.NETWORKS:
            raise KeyError(name)
        return getattr(self, name)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for name in self.NETWORKS:
            out.extend(self.network(name).named_parameters(prefix=f"{name}."))
        return out

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p.data)) for _, p in self.named_parameters())


# ---------------------------------------------------------------- networks


def _check_last(x: np.ndarray, size: int, what: str) -> None:
    if x.shape[-1] != size:
        raise ad.DimensionError(f"{what} has last dim {x.shape[-1]}, expected {size}")


def encode_frame(b: ModelBundle, x) -> Tensor:
    """Frame(s) ``[..., d]`` to latent code(s) ``[..., n]``."""
    x = ad.tensor(x)
    _check_last(x.data, b.config.d, "frame")
    return forward(b.encoder, x)


def decode_latent(b: ModelBundle, h) -> Tensor:
    h = ad.tensor(h)
    _check_last(h.data, b.config.n, "latent")
    return forward(b.decoder, h)


def reconstruct(b: ModelBundle, x) -> Tensor:
    return decode_latent(b, encode_frame(b, x))


def recon_loss(b: ModelBundle, frames) -> Tensor:
    """Mean over the batch of ``||x - dec(enc(x))||^2 / d``."""
    x = ad.tensor(frames)
    if x.data.ndim == 1:
        x = ad.reshape(x, (1, x.shape[0]))
    if x.shape[0] == 0:
        raise ValueError("recon_loss needs a non-empty batch")
    return ad.mean(ad.square(ad.sub(reconstruct(b, x), x)))


def encode_sequences(b: ModelBundle, frames) -> Tensor:
    """``(M, N, d)`` frames to ``(M, N, n)`` latent sequences."""
    x = ad.tensor(frames)
    M, N, d = x.shape
    if N != b.config.N:
        raise ValueError(f"expected sequences of {b.config.N} frames, got {N}")
    h = encode_frame(b, ad.reshape(x, (M * N, d)))
    return ad.reshape(h, (M, N, b.config.n))


def encode_sequence(b: ModelBundle, frames) -> LatentSequence:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] != b.config.N:
        raise ValueError(f"expected {b.config.N} frames, got array of shape {frames.shape}")
    h = encode_frame(b, frames).data
    return LatentSequence.from_frames(h)


def _check_one_hot(l: np.ndarray, K: int) -> None:
    _check_last(l, K, "label")
    rows = l.reshape(-1, K)
    ok = np.all((rows == 0) | (rows == 1), axis=1) & (rows.sum(axis=1) == 1)
    if not np.all(ok):
        raise ValueError("class label must be one-hot")


def _batched(*xs: Tensor) -> tuple[bool, list[Tensor]]:
    single = xs[0].data.ndim == 1
    if single:
        return True, [ad.reshape(x, (1, x.shape[0])) for x in xs]
    return False, list(xs)


def generator_flat(b: ModelBundle, z, c, l) -> Tensor:
    """Raw generator output ``(M, N*n)`` for batched ``z, c, l``."""
    cfg = b.config
    z, c, l = ad.tensor(z), ad.tensor(c), ad.tensor(l)
    _check_last(z.data, cfg.z_dim, "noise")
    _check_last(c.data, cfg.n, "initial condition")
    _check_one_hot(l.data, cfg.K)
    single, (z, c, l) = _batched(z, c, l)
    out = forward(b.generator, ad.concat([z, c, l], axis=1))
    return ad.reshape(out, (out.shape[1],)) if single else out


def generator_batch(b: ModelBundle, z, c, l) -> Tensor:
    """Batched generator output reshaped to ``(M, N, n)``."""
    out = generator_flat(b, z, c, l)
    if out.data.ndim == 1:
        out = ad.reshape(out, (1, out.shape[0]))
    return ad.reshape(out, (out.shape[0], b.config.N, b.config.n))


def generator_forward(b: ModelBundle, z, c, l) -> LatentSequence:
    out = generator_flat(b, z, c, l).data
    if out.ndim != 1:
        raise ValueError("generator_forward takes a single (z, c, l); use generator_batch")
    return LatentSequence.from_frames(out.reshape(b.config.N, b.config.n))


def discriminator_logits(b: ModelBundle, h_seq, c, l) -> Tensor:
    """Pre-sigmoid discriminator score; ``h_seq`` is ``(M, N, n)`` or ``(M, N*n)``."""
    cfg = b.config
    h, c, l = ad.tensor(h_seq), ad.tensor(c), ad.tensor(l)
    if h.data.ndim == 3:
        h = ad.reshape(h, (h.shape[0], cfg.N * cfg.n))
    elif h.data.ndim == 2 and h.shape == (cfg.N, cfg.n) and c.data.ndim == 1:
        h = ad.reshape(h, (cfg.N * cfg.n,))
    _check_last(h.data, cfg.N * cfg.n, "latent sequence")
    _check_last(c.data, cfg.n, "initial condition")
    _check_one_hot(l.data, cfg.K)
    single, (h, c, l) = _batched(h, c, l)
    x = ad.concat([h, c, l], axis=1)
    layers = b.discriminator.layers
    for layer in layers[:-1]:
        x = layer(x)
    last = layers[-1]
    a = ad.linear(x, last.weight, last.bias)
    a = ad.reshape(a, (a.shape[0],))
    return ad.reshape(a, ()) if single else a


def discriminator_forward(b: ModelBundle, h_seq, c, l) -> Tensor:
    """Probability that ``h_seq`` is real given ``(c, l)``.

    A :class:`LatentSequence` is accepted for single-sample calls.
    """
    if isinstance(h_seq, LatentSequence):
        h_seq = h_seq.frames
    return ad.sigmoid(discriminator_logits(b, h_seq, c, l))


# ---------------------------------------------------------------- losses

_CLAMP = 1e-12


def _safe_log(p: Tensor) -> Tensor:
    # last-resort clamp; training paths use the logit forms below
    clamped = np.clip(p.data, _CLAMP, None)
    if np.all(clamped == p.data):
        return ad.log(p)
    return ad.log(ad.add(p, Tensor(clamped - p.data)))


def d_loss(p_real, p_fake) -> Tensor:
    """``-mean(log p_r + log(1 - p_f))``."""
    p_real, p_fake = ad.tensor(p_real), ad.tensor(p_fake)
    return ad.neg(
        ad.add(ad.mean(_safe_log(p_real)), ad.mean(_safe_log(ad.sub(1.0, p_fake))))
    )


def g_adv_loss(p_fake) -> Tensor:
    """Non-saturating generator loss ``-mean(log p_f)``."""
    return ad.neg(ad.mean(_safe_log(ad.tensor(p_fake))))


def d_loss_logits(a_real: Tensor, a_fake: Tensor) -> Tensor:
    return ad.neg(ad.add(ad.mean(ad.log_sigmoid(a_real)), ad.mean(ad.log_sigmoid(ad.neg(a_fake)))))


def g_adv_loss_logits(a_fake: Tensor) -> Tensor:
    return ad.neg(ad.mean(ad.log_sigmoid(a_fake)))


def _as_batch(seqs) -> Tensor:
    s = ad.tensor(seqs)
    if s.data.ndim == 2:
        s = ad.reshape(s, (1, *s.shape))
    if s.data.ndim != 3:
        raise ValueError(f"expected (M, N, n) latent batch, got shape {s.shape}")
    return s


def consistency_loss_windowed(seqs, S: int, L: int) -> Tensor:
    """Mean squared step over the ``L - 1`` adjacent pairs starting at frame ``S``.

    ``seqs`` is ``(M, N, n)`` (or a single ``(N, n)`` sequence). The sum over
    pairs and latent coordinates is divided by ``M * (L - 1)``.
    """
    s = _as_batch(seqs)
    M, N, _ = s.shape
    if L < 2 or S < 0 or S + L > N:
        raise ValueError(f"window S={S}, L={L} out of range for N={N}")
    head = ad.take(s, S, S + L - 1, axis=1)
    tail = ad.take(s, S + 1, S + L, axis=1)
    return ad.scale(ad.sum(ad.square(ad.sub(tail, head))), 1.0 / (M * (L - 1)))


def consistency_loss_full(seqs) -> Tensor:
    s = _as_batch(seqs)
    if s.shape[1] < 2:
        raise ValueError("consistency loss needs at least 2 frames")
    return consistency_loss_windowed(s, 0, s.shape[1])


def g_total_loss(p_fake, seqs, S: int, L: int, lam: float) -> Tensor:
    adv = g_adv_loss(p_fake)
    if lam == 0:
        return adv
    return ad.add(adv, ad.scale(consistency_loss_windowed(seqs, S, L), lam))


def g_total_loss_logits(a_fake: Tensor, seqs, S: int, L: int, lam: float) -> Tensor:
    adv = g_adv_loss_logits(a_fake)
    if lam == 0:
        return adv
    return ad.add(adv, ad.scale(consistency_loss_windowed(seqs, S, L), lam))
