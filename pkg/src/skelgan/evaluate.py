"""Post-training measurement of a bundle against held-out synthetic data.

All randomness flows from one seeded generator, so a report is a pure
function of ``(bundle, data, seed)``. Distances are measured in normalized
frame space unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import (
    NearestCentroid,
    classify_generated,
    diversity_metric,
    jerk_metric,
    mean_pairwise,
    pca_fit,
    project_trajectory,
)
from .generation import ChainRequest, chain, generate_batch
from .model import ModelBundle, encode_frame, generator_batch, reconstruct
from .training import PreparedData

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EvalSettings:
    fidelity_generations: int = 300
    diversity_trials: int = 50
    diversity_draws: int = 10
    pose_trials: int = 50
    chain_trials: int = 100
    jerk_generations: int = 100
    gap_reference_frames: int = 200


def untrained_generator(bundle: ModelBundle, seed: int) -> ModelBundle:
    """Same autoencoder, freshly initialized generator and discriminator."""
    fresh = ModelBundle.build(bundle.config, seed=seed)
    return ModelBundle(bundle.config, bundle.encoder, bundle.decoder, fresh.generator, fresh.discriminator, dict(bundle.extras))


def reconstruction_stats(bundle: ModelBundle, X: np.ndarray) -> dict:
    frames = X.reshape(-1, X.shape[-1])
    rec = reconstruct(bundle, frames).data
    err = rec - frames
    mse = float(np.mean(err**2))
    variance = float(np.mean(frames.var(axis=0)))
    return {
        "recon_mse": mse,
        "frame_variance": variance,
        "recon_ratio": mse / variance,
        "noise_floor": float(np.linalg.norm(err, axis=-1).mean()),
    }


def _starts_by_label(data: PreparedData, rng, labels) -> np.ndarray:
    X, y = data.X_held, data.y_held
    out = []
    for l in labels:
        idx = np.flatnonzero(y == l)
        out.append(X[rng.choice(idx), 0])
    return np.stack(out)


def conditional_fidelity(bundle, data: PreparedData, classifier, rng, count: int) -> dict:
    K = bundle.config.K
    labels = np.arange(count) % K
    starts = _starts_by_label(data, rng, labels)
    z = rng.standard_normal((count, bundle.config.z_dim))
    seqs = generate_batch(bundle, starts, labels, z)
    return classify_generated(classifier, seqs, labels)


def diversity_and_start_region(bundle, data: PreparedData, pca, rng, trials: int, draws: int, floor: float) -> dict:
    cfg = bundle.config
    divs, start_ok = [], []
    mid = cfg.N // 2
    for _ in range(trials):
        i = rng.integers(len(data.held_idx))
        start = data.X_held[i, 0]
        label = int(data.y_held[i])
        z = rng.standard_normal((draws, cfg.z_dim))
        c = np.repeat(encode_frame(bundle, start).data[None], draws, axis=0)
        onehot = np.zeros((draws, cfg.K))
        onehot[:, label] = 1.0
        h = generator_batch(bundle, z, c, onehot).data  # (draws, N, n)
        frames = generate_batch(bundle, np.repeat(start[None], draws, axis=0), [label] * draws, z)
        divs.append(diversity_metric(list(frames)))
        proj = np.stack([project_trajectory(pca, seq) for seq in h])
        start_ok.append(mean_pairwise(proj[:, 0]) < mean_pairwise(proj[:, mid]))
    mean_div = float(np.mean(divs))
    return {
        "diversity": mean_div,
        "diversity_ratio": mean_div / floor if floor > 0 else float("inf"),
        "start_region_rate": float(np.mean(start_ok)),
    }


def initial_pose_control(bundle, data: PreparedData, rng, trials: int) -> dict:
    cfg = bundle.config
    mid = cfg.N // 2
    ok = []
    for _ in range(trials):
        label = int(rng.integers(cfg.K))
        idx = np.flatnonzero(data.y_held == label)
        a, b = rng.choice(idx, size=2, replace=False)
        starts = np.stack([data.X_held[a, 0], data.X_held[b, 0]])
        z = np.repeat(rng.standard_normal((1, cfg.z_dim)), 2, axis=0)
        seqs = generate_batch(bundle, starts, [label, label], z)
        first = np.linalg.norm(seqs[0, 0] - seqs[1, 0])
        middle = np.linalg.norm(seqs[0, mid] - seqs[1, mid])
        ok.append(first < middle)
    return {"initial_pose_rate": float(np.mean(ok))}


def chaining_continuity(bundle, data: PreparedData, rng, trials: int, ref_frames: int) -> dict:
    cfg = bundle.config
    all_frames = data.X_train.reshape(-1, cfg.d)
    ok, gaps, refs = [], [], []
    for _ in range(trials):
        i = rng.integers(len(data.held_idx))
        labels = [int(v) for v in rng.integers(cfg.K, size=2)]
        segs = chain(bundle, ChainRequest(data.X_held[i, 0], labels, seed=int(rng.integers(2**31))))
        last = segs[0].frames[-1]
        gap = float(np.linalg.norm(segs[1].frames[0] - last))
        sample = all_frames[rng.choice(len(all_frames), size=ref_frames, replace=False)]
        ref = float(np.linalg.norm(sample - last, axis=-1).mean())
        ok.append(gap < ref)
        gaps.append(gap)
        refs.append(ref)
    return {
        "chain_rate": float(np.mean(ok)),
        "junction_gap_mean": float(np.mean(gaps)),
        "random_gap_mean": float(np.mean(refs)),
    }


def median_jerk(bundle, data: PreparedData, rng, count: int) -> float:
    cfg = bundle.config
    labels = np.arange(count) % cfg.K
    starts = _starts_by_label(data, rng, labels)
    z = rng.standard_normal((count, cfg.z_dim))
    seqs = generate_batch(bundle, starts, labels, z)
    return float(np.median([jerk_metric(s) for s in seqs]))


def output_range(bundle, data: PreparedData, rng, count: int = 60) -> dict:
    """Decoded coordinates against the training range widened by 20% of its width."""
    cfg = bundle.config
    labels = np.arange(count) % cfg.K
    seqs = generate_batch(bundle, _starts_by_label(data, rng, labels), labels, rng.standard_normal((count, cfg.z_dim)))
    lo, hi = float(data.X_train.min()), float(data.X_train.max())
    pad = 0.2 * (hi - lo)
    return {
        "generated_min": float(seqs.min()),
        "generated_max": float(seqs.max()),
        "training_min": lo,
        "training_max": hi,
        "within_output_band": bool(seqs.min() >= lo - pad and seqs.max() <= hi + pad),
    }


def evaluate(bundle: ModelBundle, data: PreparedData, seed: int = 0, settings: EvalSettings = EvalSettings()) -> dict:
    """Full metric report (versioned, JSON-serializable)."""
    rng = np.random.default_rng(seed)
    K = bundle.config.K
    classifier = NearestCentroid.fit(data.X_train, data.y_train, K)
    rec = reconstruction_stats(bundle, data.X_held)
    train_codes = encode_frame(bundle, data.X_train.reshape(-1, bundle.config.d)).data
    pca = pca_fit(train_codes)

    report = {"schema_version": SCHEMA_VERSION, "seed": seed}
    report.update(rec)
    report["classifier_real_accuracy"] = classifier.accuracy(data.X_held, data.y_held)
    fid = conditional_fidelity(bundle, data, classifier, rng, settings.fidelity_generations)
    report["conditional_accuracy"] = fid["accuracy"]
    report["conditional_accuracy_per_class"] = {str(k): v for k, v in fid["per_class"].items()}
    base = conditional_fidelity(
        untrained_generator(bundle, seed + 1), data, classifier, rng, settings.fidelity_generations
    )
    report["untrained_accuracy"] = base["accuracy"]
    report["chance_accuracy"] = 1.0 / K
    report.update(
        diversity_and_start_region(
            bundle, data, pca, rng, settings.diversity_trials, settings.diversity_draws, rec["noise_floor"]
        )
    )
    report.update(initial_pose_control(bundle, data, rng, settings.pose_trials))
    report.update(chaining_continuity(bundle, data, rng, settings.chain_trials, settings.gap_reference_frames))
    report["median_jerk"] = median_jerk(bundle, data, rng, settings.jerk_generations)
    report.update(output_range(bundle, data, rng))
    return report
