"""Skeleton sequences, normalization, resampling and on-disk formats.

Canonical interchange format (JSON)::

    {"classes": K, "joints": J, "dims": D,
     "sequences": [{"label": int, "frames": [[coord, ...], ...], "source": str}, ...]}

Each frame is the row-major flattening of a ``J x D`` joint array. The
``source`` key is optional on read.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

log = logging.getLogger(__name__)

TARGET_MAX = 0.9


@dataclass
class ActionSequence:
    frames: np.ndarray  # (T, J, D)
    label: int
    source: str = ""
    flags: set[str] = field(default_factory=set)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3:
            raise ValueError(f"frames must be (T, J, D), got shape {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError(f"non-finite coordinates in sequence {self.source!r}")
        if self.label < 0:
            raise ValueError("label must be non-negative")

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def joints(self) -> int:
        return self.frames.shape[1]

    @property
    def dims(self) -> int:
        return self.frames.shape[2]

    def flat(self) -> np.ndarray:
        """``(T, J*D)`` frame vectors."""
        return self.frames.reshape(self.length, -1)


@dataclass
class Dataset:
    classes: int
    joints: int
    dims: int
    sequences: list[ActionSequence]

    def __post_init__(self):
        for s in self.sequences:
            if s.label >= self.classes:
                raise ValueError(f"label {s.label} >= class count {self.classes}")
            if (s.joints, s.dims) != (self.joints, self.dims):
                raise ValueError(
                    f"sequence {s.source!r} has {s.joints}x{s.dims} joints, dataset is {self.joints}x{self.dims}"
                )

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def frame_dim(self) -> int:
        return self.joints * self.dims

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked ``(S, N, d)`` frames and ``(S,)`` integer labels (equal lengths required)."""
        lengths = {s.length for s in self.sequences}
        if len(lengths) != 1:
            raise ValueError(f"sequences have differing lengths {sorted(lengths)}; resample first")
        X = np.stack([s.flat() for s in self.sequences])
        y = np.array([s.label for s in self.sequences], dtype=np.int64)
        return X, y

    def subset(self, idx) -> "Dataset":
        return Dataset(self.classes, self.joints, self.dims, [self.sequences[i] for i in idx])


# ---------------------------------------------------------------- labels


def one_hot(label: int, K: int) -> np.ndarray:
    if not 0 <= label < K:
        raise ValueError(f"label {label} out of range for {K} classes")
    out = np.zeros(K)
    out[label] = 1.0
    return out


def one_hot_batch(labels, K: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise ValueError(f"labels out of range for {K} classes")
    return np.eye(K)[labels]


# ---------------------------------------------------------------- normalization


def center(seq: ActionSequence) -> ActionSequence:
    """Subtract joint 0 of frame 0 from every joint of every frame."""
    root = seq.frames[0, 0]
    return ActionSequence(seq.frames - root, seq.label, seq.source, set(seq.flags))


def fit_scale(sequences: list[ActionSequence]) -> float:
    """Multiplier mapping the largest root-centered |coordinate| to 0.9."""
    peak = 0.0
    for s in sequences:
        peak = max(peak, float(np.abs(center(s).frames).max(initial=0.0)))
    if peak == 0.0:
        return 1.0
    return TARGET_MAX / peak


def normalize(seq: ActionSequence, scale: float) -> ActionSequence:
    """Root-center then multiply by ``scale`` (fitted on the training split).

    An all-zero sequence is returned unchanged with the ``degenerate`` flag set.
    """
    if seq.length == 0:
        raise ValueError("cannot normalize an empty sequence")
    if not np.any(seq.frames):
        log.warning("degenerate all-zero sequence %r left unchanged", seq.source)
        return ActionSequence(seq.frames.copy(), seq.label, seq.source, seq.flags | {"degenerate"})
    c = center(seq)
    return ActionSequence(c.frames * scale, seq.label, seq.source, set(seq.flags))


def normalize_frame(frame: np.ndarray, joints: int, dims: int, scale: float) -> np.ndarray:
    """Normalize a single flat frame by centering on its own root joint."""
    f = np.asarray(frame, dtype=np.float64).reshape(joints, dims)
    return ((f - f[0]) * scale).reshape(-1)


def resample(seq: ActionSequence, N: int) -> ActionSequence:
    """Linear interpolation at ``N`` uniform times spanning the first and last frame."""
    T = seq.length
    if T < 2:
        raise ValueError(f"resample needs at least 2 frames, got {T}")
    if N < 2:
        raise ValueError("target length must be at least 2")
    if T == N:
        return ActionSequence(seq.frames.copy(), seq.label, seq.source, set(seq.flags))
    t = np.linspace(0.0, T - 1.0, N)
    lo = np.minimum(np.floor(t).astype(int), T - 2)
    w = (t - lo)[:, None, None]
    frames = (1.0 - w) * seq.frames[lo] + w * seq.frames[lo + 1]
    frames[0] = seq.frames[0]
    frames[-1] = seq.frames[-1]
    return ActionSequence(frames, seq.label, seq.source, set(seq.flags))


# ---------------------------------------------------------------- batching


def split_indices(labels: np.ndarray, holdout: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratified train/held-out split of sample indices."""
    rng = np.random.default_rng(seed)
    train, held = [], []
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        idx = idx[rng.permutation(len(idx))]
        cut = int(round(len(idx) * holdout))
        held.extend(idx[:cut])
        train.extend(idx[cut:])
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(held, dtype=np.int64))


def batches(
    X: np.ndarray, y: np.ndarray, M: int, K: int, seed, epochs: int | None = None
) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield ``(frames (M,N,d), one-hot labels (M,K), labels (M,))`` batches.

    Each epoch is a fresh permutation, so every sample appears exactly once
    per epoch; the final batch of an epoch may be short. ``seed`` may be an
    int or a Generator.
    """
    S = len(X)
    if M > S:
        raise ValueError(f"batch size {M} exceeds dataset size {S}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    epoch = 0
    while epochs is None or epoch < epochs:
        order = rng.permutation(S)
        for start in range(0, S, M):
            idx = order[start : start + M]
            yield X[idx], one_hot_batch(y[idx], K), y[idx]
        epoch += 1


# ---------------------------------------------------------------- file formats


def dataset_to_dict(ds: Dataset) -> dict:
    return {
        "classes": ds.classes,
        "joints": ds.joints,
        "dims": ds.dims,
        "sequences": [
            {"label": int(s.label), "source": s.source, "frames": s.flat().tolist()}
            for s in ds.sequences
        ],
    }


def dataset_from_dict(raw: dict) -> Dataset:
    try:
        K, J, D = int(raw["classes"]), int(raw["joints"]), int(raw["dims"])
        seqs = []
        for i, item in enumerate(raw["sequences"]):
            frames = np.asarray(item["frames"], dtype=np.float64)
            if frames.ndim != 2 or frames.shape[1] != J * D:
                raise ValueError(f"sequence {i}: frames must be rows of {J * D} coordinates")
            seqs.append(ActionSequence(frames.reshape(-1, J, D), int(item["label"]), item.get("source", "")))
    except KeyError as exc:
        raise ValueError(f"missing key {exc} in sequence file") from None
    return Dataset(K, J, D, seqs)


def dumps_dataset(ds: Dataset) -> str:
    return json.dumps(dataset_to_dict(ds), separators=(",", ":")) + "\n"


def loads_dataset(text: str) -> Dataset:
    return dataset_from_dict(json.loads(text))


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(dumps_dataset(ds))


def load_dataset(path) -> Dataset:
    return loads_dataset(Path(path).read_text())


def dumps_csv(ds: Dataset) -> str:
    """One row per frame: seq_id, frame_idx, label, c0, c1, ..."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seq_id", "frame_idx", "label", *(f"c{i}" for i in range(ds.frame_dim))])
    for sid, s in enumerate(ds.sequences):
        for fi, frame in enumerate(s.flat()):
            w.writerow([sid, fi, s.label, *(repr(float(v)) for v in frame)])
    return buf.getvalue()


def save_csv(ds: Dataset, path) -> None:
    Path(path).write_text(dumps_csv(ds))
