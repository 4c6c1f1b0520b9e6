"""Trajectory projection and the metrics used to evaluate a trained model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateDataError(ValueError):
    pass


# ---------------------------------------------------------------- PCA


@dataclass
class PcaModel:
    mean: np.ndarray  # (n,)
    axes: np.ndarray  # (2, n), orthonormal rows
    variances: np.ndarray  # (2,)

    def project(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.mean) @ self.axes.T


def pca_fit(points: np.ndarray) -> PcaModel:
    """Top-2 principal axes of ``points`` (rows), largest-magnitude component positive."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3 or X.shape[1] < 2:
        raise ValueError(f"pca_fit needs at least 3 points of dimension >= 2, got {X.shape}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (len(X) - 1)
    if not np.any(cov):
        raise DegenerateDataError("all points coincide")
    w, V = np.linalg.eigh(cov)
    order = np.argsort(w)[::-1][:2]
    axes = V[:, order].T.copy()
    for row in axes:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean, axes, w[order])


def project_trajectory(model: PcaModel, h_seq: np.ndarray) -> np.ndarray:
    """``(N, n)`` latent frames to ``(N, 2)`` points."""
    h = np.asarray(h_seq, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != model.mean.shape[0]:
        raise ValueError(f"expected (N, {model.mean.shape[0]}) latent frames, got {h.shape}")
    return model.project(h)


# ---------------------------------------------------------------- metrics


def frame_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Frame-averaged L2 distance between two ``(N, d)`` sequences."""
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1).mean())


def diversity_metric(sequences) -> float:
    """Mean pairwise frame-averaged L2 distance."""
    seqs = [np.asarray(s, dtype=np.float64) for s in sequences]
    if len(seqs) < 2:
        raise ValueError("diversity needs at least two sequences")
    dists = [frame_distance(seqs[i], seqs[j]) for i in range(len(seqs)) for j in range(i + 1, len(seqs))]
    return float(np.mean(dists))


def jerk_metric(sequence) -> float:
    """Mean squared adjacent-frame displacement."""
    s = np.asarray(sequence, dtype=np.float64)
    if s.ndim == 1:
        s = s[:, None]
    if len(s) < 2:
        raise ValueError("jerk needs at least two frames")
    return float(np.sum(np.diff(s, axis=0) ** 2) / (len(s) - 1))


def mean_pairwise(points: np.ndarray) -> float:
    p = np.asarray(points, dtype=np.float64)
    i, j = np.triu_indices(len(p), k=1)
    return float(np.linalg.norm(p[i] - p[j], axis=-1).mean())


# ---------------------------------------------------------------- classifier


@dataclass
class NearestCentroid:
    centroids: np.ndarray  # (K, N*d)

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, K: int) -> "NearestCentroid":
        flat = np.asarray(X, dtype=np.float64).reshape(len(X), -1)
        missing = [k for k in range(K) if not np.any(y == k)]
        if missing:
            raise ValueError(f"no training samples for classes {missing}")
        return cls(np.stack([flat[y == k].mean(axis=0) for k in range(K)]))

    def predict(self, X: np.ndarray) -> np.ndarray:
        flat = np.asarray(X, dtype=np.float64).reshape(len(X), -1)
        d2 = ((flat[:, None, :] - self.centroids[None]) ** 2).sum(-1)
        return d2.argmin(axis=1)

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y)))


def classify_generated(classifier: NearestCentroid, sequences: np.ndarray, labels) -> dict:
    """Overall and per-class fraction of sequences predicted as their conditioning label."""
    labels = np.asarray(labels)
    pred = classifier.predict(sequences)
    per_class = {
        int(k): float(np.mean(pred[labels == k] == k)) for k in np.unique(labels)
    }
    return {"accuracy": float(np.mean(pred == labels)), "per_class": per_class}
