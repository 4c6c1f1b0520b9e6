"""Versioned binary checkpoints.

Byte layout (all integers little-endian)::

    offset 0   8 bytes   magic b"SKGNCKPT"
    offset 8   uint32    format version (currently 1)
    offset 12  uint64    header length H in bytes
    offset 20  H bytes   UTF-8 JSON header, keys sorted, no whitespace
    offset 20+H          float64 little-endian payload

The header holds ``model_config``, ``extras``, ``optimizers`` (scalar Adam
state per group) and ``tensors``: a list of ``{"name", "shape", "offset",
"count"}`` where ``offset`` counts float64 values from the payload start.
Tensors are stored row-major. Parameter names look like
``generator.1.weight``; Adam moments are ``opt.<group>.m.<i>`` and
``opt.<group>.v.<i>``. Serialization is a pure function of the model and
optimizer state, so equal states give byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import ModelBundle, ModelConfig
from .nn import Adam

MAGIC = b"SKGNCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _ordered_optimizers(optimizers: dict[str, Adam] | None) -> list[tuple[str, Adam]]:
    return sorted((optimizers or {}).items())


def dumps(bundle: ModelBundle, optimizers: dict[str, Adam] | None = None) -> bytes:
    arrays: list[tuple[str, np.ndarray]] = [(n, p.data) for n, p in bundle.named_parameters()]
    opt_meta = {}
    for group, opt in _ordered_optimizers(optimizers):
        s = opt.state
        opt_meta[group] = {"lr": s.lr, "beta1": s.beta1, "beta2": s.beta2, "eps": s.eps, "t": s.t}
        arrays += [(f"opt.{group}.m.{i}", m) for i, m in enumerate(s.m)]
        arrays += [(f"opt.{group}.v.{i}", v) for i, v in enumerate(s.v)]
    entries, offset = [], 0
    for name, arr in arrays:
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "count": int(arr.size)})
        offset += int(arr.size)
    header = {
        "model_config": bundle.config.to_dict(),
        "extras": bundle.extras,
        "optimizers": opt_meta,
        "tensors": entries,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    return MAGIC + struct.pack("<IQ", VERSION, len(head)) + head + payload


def loads(blob: bytes, optimizers: dict[str, Adam] | None = None) -> ModelBundle:
    """Rebuild a bundle.

    When ``optimizers`` is given, each group's scalar state and moments are
    restored into it; its parameter list is left untouched.
    """
    if blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if len(blob) < 20:
        raise CheckpointError("truncated checkpoint header")
    version, hlen = struct.unpack("<IQ", blob[8:20])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(blob[20 : 20 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    body = blob[20 + hlen :]
    if len(body) % 8:
        raise CheckpointError("payload length is not a whole number of float64 values")
    payload = np.frombuffer(body, dtype="<f8")
    values = {}
    for e in header["tensors"]:
        if e["offset"] + e["count"] > payload.size:
            raise CheckpointError(f"tensor {e['name']} runs past end of file")
        chunk = payload[e["offset"] : e["offset"] + e["count"]]
        values[e["name"]] = chunk.astype(np.float64).reshape(e["shape"])
    bundle = ModelBundle.build(ModelConfig.from_dict(header["model_config"]))
    bundle.extras = header.get("extras", {})
    for name, p in bundle.named_parameters():
        if name not in values:
            raise CheckpointError(f"missing tensor {name}")
        if values[name].shape != p.shape:
            raise CheckpointError(f"tensor {name} has shape {values[name].shape}, expected {p.shape}")
        p.data = values[name].copy()
    if optimizers:
        for group, opt in _ordered_optimizers(optimizers):
            meta = header["optimizers"].get(group)
            if meta is None:
                raise CheckpointError(f"no optimizer state for group {group!r}")
            s = opt.state
            s.lr, s.beta1, s.beta2, s.eps, s.t = meta["lr"], meta["beta1"], meta["beta2"], meta["eps"], meta["t"]
            s.m = [values[f"opt.{group}.m.{i}"].copy() for i in range(len(s.m))]
            s.v = [values[f"opt.{group}.v.{i}"].copy() for i in range(len(s.v))]
    return bundle


def save(path, bundle: ModelBundle, optimizers: dict[str, Adam] | None = None) -> None:
    Path(path).write_bytes(dumps(bundle, optimizers))


def load(path, optimizers: dict[str, Adam] | None = None) -> ModelBundle:
    return loads(Path(path).read_bytes(), optimizers)

