"""Procedural 2-D stick-figure actions for desk-scale training.

Five joints (root, head, left hand, right hand, foot) in two dimensions.
Each class is a parametric motion that leaves and returns to a rest pose.
Samples vary in three ways:

* style: amplitude, timing warp and a smooth low-frequency wobble that is
  zero at the first frame;
* start pose: a small per-joint offset at frame 0;
* drift: the start offset is amplified while the action is under way, so
  the start pose carries information about the rest of the motion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ActionSequence, Dataset

J, D = 5, 2
REST = np.array(
    [
        [0.0, 0.0],  # root
        [0.0, 1.0],  # head
        [-0.5, 0.45],  # left hand
        [0.5, 0.45],  # right hand
        [0.0, -1.0],  # foot
    ]
)


class SyntheticConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticActionSpec:
    label: int
    family: str
    amplitude: float = 1.0
    style_noise: float = 0.03
    start_noise: float = 0.05
    drift_gain: float = 1.0


def _raise(t: np.ndarray, a: float) -> np.ndarray:
    e = np.sin(np.pi * t)[:, None]
    out = np.zeros((len(t), J, D))
    out[:, 2] = e * a * np.array([0.2, 0.8])
    out[:, 3] = e * a * np.array([-0.2, 0.8])
    return out


def _squat(t: np.ndarray, a: float) -> np.ndarray:
    e = np.sin(np.pi * t)[:, None]
    out = np.zeros((len(t), J, D))
    down = e * a * np.array([0.0, -0.55])
    out[:, 0:4] = down[:, None, :]
    out[:, 2] += e * a * np.array([-0.25, 0.0])
    out[:, 3] += e * a * np.array([0.25, 0.0])
    return out


def _wave(t: np.ndarray, a: float) -> np.ndarray:
    e = np.sin(np.pi * t)
    out = np.zeros((len(t), J, D))
    out[:, 3, 1] = e * a * 0.7
    out[:, 3, 0] = e * a * 0.35 * np.sin(4 * np.pi * t)
    out[:, 1, 0] = e * a * 0.08
    return out


FAMILIES = {"raise": _raise, "squat": _squat, "wave": _wave}


def default_specs(K: int = 3) -> list[SyntheticActionSpec]:
    names = list(FAMILIES)
    if not 2 <= K <= len(names):
        raise SyntheticConfigError(f"default specs cover 2..{len(names)} classes, asked for {K}")
    return [SyntheticActionSpec(k, names[k]) for k in range(K)]


def mean_trajectory(spec: SyntheticActionSpec, N: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, N)
    return REST[None] + FAMILIES[spec.family](t, spec.amplitude)


def _check_specs(specs: list[SyntheticActionSpec], N: int) -> None:
    if len(specs) < 2:
        raise SyntheticConfigError("need at least two classes")
    labels = sorted(s.label for s in specs)
    if labels != list(range(len(specs))):
        raise SyntheticConfigError(f"labels must be 0..K-1, got {labels}")
    for s in specs:
        if s.family not in FAMILIES:
            raise SyntheticConfigError(f"unknown motion family {s.family!r}")
    means = [mean_trajectory(s, N) for s in specs]
    noise = max(s.style_noise for s in specs)
    for i in range(len(specs)):
        for j in range(i + 1, len(specs)):
            dist = np.linalg.norm(means[i] - means[j], axis=-1).mean()
            if dist <= noise:
                raise SyntheticConfigError(
                    f"classes {i} and {j} are not distinguishable: mean distance {dist:.3g} <= style noise {noise:.3g}"
                )


def _sample(spec: SyntheticActionSpec, N: int, rng: np.random.Generator) -> np.ndarray:
    t = np.linspace(0.0, 1.0, N)
    amp = spec.amplitude * (1.0 + 0.2 * rng.uniform(-1.0, 1.0))
    warp = np.exp(0.25 * rng.uniform(-1.0, 1.0))
    tw = t**warp
    frames = REST[None] + FAMILIES[spec.family](tw, amp)

    # smooth wobble, zero at t=0
    wobble = np.zeros((N, J, D))
    for f in (0.5, 1.0, 1.5):
        coef = rng.normal(size=(J, D)) * spec.style_noise / f
        wobble += np.sin(np.pi * f * t)[:, None, None] * coef[None]
    wobble[:, 0] = 0.0
    frames += wobble

    start = rng.normal(size=(J, D)) * spec.start_noise
    start[0] = 0.0
    gain = 1.0 + spec.drift_gain * np.sin(np.pi * t)
    frames += gain[:, None, None] * start[None]
    return frames


def synth_generate(
    specs: list[SyntheticActionSpec], samples_per_class: int, N: int, seed: int
) -> Dataset:
    """Deterministic dataset of ``len(specs) * samples_per_class`` sequences, class-interleaved."""
    _check_specs(specs, N)
    if samples_per_class < 1:
        raise SyntheticConfigError("samples_per_class must be positive")
    rng = np.random.default_rng(seed)
    seqs = []
    by_label = sorted(specs, key=lambda s: s.label)
    for i in range(samples_per_class):
        for spec in by_label:
            seqs.append(ActionSequence(_sample(spec, N, rng), spec.label, f"synth-{spec.family}-{i}"))
    return Dataset(len(specs), J, D, seqs)
