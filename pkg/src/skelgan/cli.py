"""Command-line interface.

Every option can also come from a JSON config file given by ``--config`` or
the ``SKELGAN_CONFIG`` environment variable. Top-level scalar keys apply to
any subcommand that accepts them; an object keyed by subcommand name (e.g.
``"train": {...}``) applies to that subcommand only. Flags on the command
line win over the file.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import checkpoint
from .analysis import pca_fit, project_trajectory
from .data import Dataset, dumps_csv, dumps_dataset, load_dataset, normalize_frame, save_dataset
from .evaluate import evaluate
from .generation import ChainRequest, GenerationRequest, chain, generate
from .model import encode_frame, generator_batch
from .ntu import NTU_CLASSES, NTU_JOINTS, SkeletonParseError, load_ntu_sequence
from .plot import trajectories_csv, trajectories_svg
from .synthetic import default_specs, synth_generate
from .training import TrainConfig, prepare, train

CONFIG_ENV = "SKELGAN_CONFIG"
log = logging.getLogger("skelgan")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- parser


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _start_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("initial pose (default: mean training start pose)")
    g.add_argument("--initial", type=_float_list, help="normalized start frame as comma-separated coordinates")
    g.add_argument("--data", help="dataset JSON to take the start frame from")
    g.add_argument("--index", type=int, default=0, help="sequence index in --data (default 0)")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="skelgan", description=__doc__.split("\n")[0])
    parser.add_argument("--config", help=f"JSON config file (or set {CONFIG_ENV})")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    subs = {}

    p = subs["synth"] = sub.add_parser("synth", help="write a synthetic stick-figure dataset")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=300)
    p.add_argument("--length", type=int, default=32, help="frames per sequence")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output JSON path")
    p.add_argument("--csv", help="also write one row per frame to this CSV path")

    p = subs["import-ntu"] = sub.add_parser("import-ntu", help="convert .skeleton files to dataset JSON")
    p.add_argument("paths", nargs="*", help=".skeleton files")
    p.add_argument("--out", help="output JSON path")
    p.add_argument("--classes", type=int, default=NTU_CLASSES)
    p.add_argument("--label", type=int, help="force this class for every file (default: from A### in the name)")

    p = subs["train"] = sub.add_parser("train", help="train the autoencoder and conditional GAN")
    p.add_argument("--data", help="dataset JSON")
    p.add_argument("--out-dir", help="directory for checkpoints and metrics.jsonl")
    defaults = TrainConfig()
    for name, flag, typ in [
        ("epochs", "--epochs", int),
        ("lr", "--lr", float),
        ("batch_size", "--batch-size", int),
        ("lam", "--lam", float),
        ("z_dim", "--z-dim", int),
        ("n", "--latent-dim", int),
        ("N", "--length", int),
        ("window", "--window", int),
        ("d_steps_per_g", "--d-steps", int),
        ("seed", "--seed", int),
        ("holdout", "--holdout", float),
        ("checkpoint_every", "--checkpoint-every", int),
        ("max_steps", "--max-steps", int),
    ]:
        p.add_argument(flag, dest=name, type=typ, default=getattr(defaults, name), help=f"default {getattr(defaults, name)}")

    p = subs["generate"] = sub.add_parser("generate", help="generate one sequence from a checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--label", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.add_argument("--csv", help="also write CSV here")
    _start_options(p)

    p = subs["chain"] = sub.add_parser("chain", help="generate consecutive actions")
    p.add_argument("--checkpoint")
    p.add_argument("--labels", type=_int_list, help="comma-separated class ids, in order")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.add_argument("--csv", help="also write CSV here")
    _start_options(p)

    p = subs["eval"] = sub.add_parser("eval", help="full metric report as JSON")
    p.add_argument("--checkpoint")
    p.add_argument("--data", help="the dataset the checkpoint was trained on")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output JSON path (default stdout)")

    p = subs["plot"] = sub.add_parser("plot", help="2-D latent trajectories as SVG and CSV")
    p.add_argument("--checkpoint")
    p.add_argument("--data", help="dataset used to fit the projection and pick the start pose")
    p.add_argument("--index", type=int, default=0, help="held-out sequence whose first frame is the start pose")
    p.add_argument("--label", type=int, help="class to generate (default: that sequence's label)")
    p.add_argument("--draws", type=int, default=3, help="number of noise draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--svg", help="SVG output path")
    p.add_argument("--csv", help="CSV output path")
    return parser, subs


def _apply_config(parser, subs, args, argv) -> argparse.Namespace:
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        return args
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise RuntimeError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    sub = subs[args.command]
    known = {a.dest for a in sub._actions}
    values = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    values = {k.replace("-", "_"): v for k, v in values.items() if k.replace("-", "_") in known}
    section = raw.get(args.command, {})
    for k, v in section.items():
        key = k.replace("-", "_")
        if key not in known:
            raise UsageError(f"unknown option {k!r} in config section {args.command!r}")
        values[key] = v
    sub.set_defaults(**values)
    return parser.parse_args(argv)


def _require(args, *names) -> None:
    missing = [n for n in names if getattr(args, n) in (None, [])]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{args.command}: missing required option(s) {flags}")


# ---------------------------------------------------------------- helpers


def _write_text(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _start_frame(args, bundle) -> np.ndarray:
    extras = bundle.extras
    if args.initial is not None:
        frame = np.asarray(args.initial, dtype=np.float64)
        if frame.shape != (bundle.config.d,):
            raise UsageError(f"--initial needs {bundle.config.d} coordinates, got {frame.size}")
        return frame
    if args.data:
        ds = load_dataset(args.data)
        if not 0 <= args.index < len(ds):
            raise UsageError(f"--index {args.index} out of range for {len(ds)} sequences")
        raw = ds.sequences[args.index].flat()[0]
        return normalize_frame(raw, ds.joints, ds.dims, extras["scale"])
    if "default_start" not in extras:
        raise RuntimeError("checkpoint has no stored start pose; pass --initial or --data")
    return np.asarray(extras["default_start"], dtype=np.float64)


def _sequences_dataset(bundle, seqs, source: str) -> Dataset:
    J, D = bundle.extras.get("joints", bundle.config.d), bundle.extras.get("dims", 1)
    actions = [s.to_action(J, D, f"{source}-{i}") for i, s in enumerate(seqs)]
    return Dataset(bundle.config.K, J, D, actions)


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    _require(args, "out")
    ds = synth_generate(default_specs(args.classes), args.per_class, args.length, args.seed)
    save_dataset(ds, args.out)
    if args.csv:
        _write_text(args.csv, dumps_csv(ds))
    log.info("wrote %d sequences to %s", len(ds), args.out)
    return 0


def cmd_import_ntu(args) -> int:
    _require(args, "paths", "out")
    seqs = []
    for path in args.paths:
        try:
            seq = load_ntu_sequence(path, args.label)
        except SkeletonParseError as exc:
            raise RuntimeError(f"{path}: {exc}") from None
        if seq.label >= args.classes:
            raise RuntimeError(f"{path}: class {seq.label} >= --classes {args.classes}")
        if seq.length < 2:
            raise RuntimeError(f"{path}: fewer than two frames with a tracked body")
        seqs.append(seq)
    save_dataset(Dataset(args.classes, NTU_JOINTS, 3, seqs), args.out)
    log.info("imported %d files", len(seqs))
    return 0


def cmd_train(args) -> int:
    _require(args, "data", "out_dir")
    out = Path(args.out_dir)
    cfg = TrainConfig(
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch_size,
        lam=args.lam,
        z_dim=args.z_dim,
        n=args.n,
        N=args.N,
        window=args.window,
        d_steps_per_g=args.d_steps_per_g,
        seed=args.seed,
        holdout=args.holdout,
        checkpoint_every=args.checkpoint_every,
        checkpoint_dir=str(out),
        metrics_path=str(out / "metrics.jsonl"),
        max_steps=args.max_steps,
    )
    out.mkdir(parents=True, exist_ok=True)
    result = train(load_dataset(args.data), cfg)
    last = result.history[-1] if result.history else None
    summary = {
        "steps": len(result.history),
        "checkpoint": str(result.checkpoints[-1]),
        "last": asdict(last) if last else None,
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_generate(args) -> int:
    _require(args, "checkpoint", "label")
    bundle = checkpoint.load(args.checkpoint)
    seq = generate(bundle, GenerationRequest(_start_frame(args, bundle), args.label, seed=args.seed))
    ds = _sequences_dataset(bundle, [seq], f"generated-seed{args.seed}")
    _write_text(args.out, dumps_dataset(ds))
    if args.csv:
        _write_text(args.csv, dumps_csv(ds))
    return 0


def cmd_chain(args) -> int:
    _require(args, "checkpoint", "labels")
    bundle = checkpoint.load(args.checkpoint)
    segs = chain(bundle, ChainRequest(_start_frame(args, bundle), args.labels, seed=args.seed))
    ds = _sequences_dataset(bundle, segs, f"chain-seed{args.seed}")
    _write_text(args.out, dumps_dataset(ds))
    if args.csv:
        _write_text(args.csv, dumps_csv(ds))
    return 0


def _prepared(bundle, data_path):
    ex = bundle.extras
    return prepare(load_dataset(data_path), bundle.config.N, ex["holdout"], ex["split_seed"], scale=ex["scale"])


def cmd_eval(args) -> int:
    _require(args, "checkpoint", "data")
    bundle = checkpoint.load(args.checkpoint)
    report = evaluate(bundle, _prepared(bundle, args.data), seed=args.seed)
    _write_text(args.out, json.dumps(report, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_plot(args) -> int:
    _require(args, "checkpoint", "data")
    if not (args.svg or args.csv):
        raise UsageError("plot: give --svg and/or --csv")
    bundle = checkpoint.load(args.checkpoint)
    cfg = bundle.config
    data = _prepared(bundle, args.data)
    if not 0 <= args.index < len(data.held_idx):
        raise UsageError(f"--index {args.index} out of range for {len(data.held_idx)} held-out sequences")
    start = data.X_held[args.index, 0]
    label = int(data.y_held[args.index]) if args.label is None else args.label
    if not 0 <= label < cfg.K:
        raise UsageError(f"--label {label} out of range for {cfg.K} classes")
    pca = pca_fit(encode_frame(bundle, data.X_train.reshape(-1, cfg.d)).data)
    rng = np.random.default_rng(args.seed)
    z = rng.standard_normal((args.draws, cfg.z_dim))
    c = np.repeat(encode_frame(bundle, start).data[None], args.draws, axis=0)
    onehot = np.zeros((args.draws, cfg.K))
    onehot[:, label] = 1.0
    h = generator_batch(bundle, z, c, onehot).data
    trajs = [project_trajectory(pca, seq) for seq in h]
    star = pca.project(c[0])
    if args.svg:
        _write_text(args.svg, trajectories_svg(trajs, star, title=f"class {label}, {args.draws} noise draws"))
    if args.csv:
        _write_text(args.csv, trajectories_csv(trajs, [label] * len(trajs)))
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "import-ntu": cmd_import_ntu,
    "train": cmd_train,
    "generate": cmd_generate,
    "chain": cmd_chain,
    "eval": cmd_eval,
    "plot": cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = _apply_config(parser, subs, args, argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"skelgan: error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, OSError, KeyError) as exc:
        print(f"skelgan: {exc}", file=sys.stderr)
        return 1
