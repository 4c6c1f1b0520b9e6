"""Reader and writer for NTU RGB+D ``.skeleton`` text files.

Layout::

    <frame count>
    per frame:
        <body count>
        per body:
            <body id> <9 further metadata fields>
            <joint count>
            per joint: x y z depthX depthY colorX colorY oriW oriX oriY oriZ trackingState

Only ``x y z`` feed the model. The remaining fields are validated as numbers
and kept verbatim so that a parsed file can be written back unchanged.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import ActionSequence

NTU_JOINTS = 25
NTU_CLASSES = 60
BODY_FIELDS = 10
JOINT_FIELDS = 12


class SkeletonParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class NtuBody:
    meta: list[str]  # 10 tokens, body id first
    xyz: np.ndarray  # (25, 3)
    joint_extra: list[list[str]]  # 9 tokens per joint

    @property
    def body_id(self) -> str:
        return self.meta[0]


@dataclass
class NtuSkeleton:
    frames: list[list[NtuBody]] = field(default_factory=list)

    def first_body_frames(self) -> np.ndarray:
        """``(T, 25, 3)`` using the first listed (tracked) body of each frame.

        Frames with no bodies are skipped.
        """
        rows = [bodies[0].xyz for bodies in self.frames if bodies]
        if not rows:
            return np.zeros((0, NTU_JOINTS, 3))
        return np.stack(rows)

    def bodies(self) -> dict[str, np.ndarray]:
        """Per body id, the frames in which that body appears."""
        out: dict[str, list[np.ndarray]] = {}
        for bodies in self.frames:
            for b in bodies:
                out.setdefault(b.body_id, []).append(b.xyz)
        return {k: np.stack(v) for k, v in out.items()}


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, what: str) -> tuple[int, list[str]]:
        while self.pos < len(self.lines) and not self.lines[self.pos].strip():
            self.pos += 1
        if self.pos >= len(self.lines):
            raise SkeletonParseError(self.pos + 1, f"unexpected end of file, expected {what}")
        self.pos += 1
        return self.pos, self.lines[self.pos - 1].split()


def _int(tokens: list[str], lineno: int, what: str) -> int:
    if len(tokens) != 1:
        raise SkeletonParseError(lineno, f"expected a single {what}, got {len(tokens)} fields")
    try:
        value = int(tokens[0])
    except ValueError:
        raise SkeletonParseError(lineno, f"non-numeric {what} {tokens[0]!r}") from None
    if value < 0:
        raise SkeletonParseError(lineno, f"negative {what}")
    return value


def _numbers(tokens: list[str], lineno: int, count: int, what: str) -> list[float]:
    if len(tokens) < count:
        raise SkeletonParseError(lineno, f"{what} needs {count} fields, got {len(tokens)}")
    out = []
    for tok in tokens:
        try:
            out.append(float(tok))
        except ValueError:
            raise SkeletonParseError(lineno, f"non-numeric token {tok!r} in {what}") from None
    if not all(np.isfinite(out[:3])):
        raise SkeletonParseError(lineno, f"non-finite coordinate in {what}")
    return out


def parse_ntu_skeleton(data: str | bytes) -> NtuSkeleton:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = _Lines(text)
    lineno, tok = lines.next("frame count")
    n_frames = _int(tok, lineno, "frame count")
    skel = NtuSkeleton()
    for _ in range(n_frames):
        lineno, tok = lines.next("body count")
        n_bodies = _int(tok, lineno, "body count")
        bodies = []
        for _ in range(n_bodies):
            lineno, meta = lines.next("body metadata")
            _numbers(meta, lineno, BODY_FIELDS, "body metadata")
            lineno, tok = lines.next("joint count")
            n_joints = _int(tok, lineno, "joint count")
            if n_joints != NTU_JOINTS:
                raise SkeletonParseError(lineno, f"joint count {n_joints} != {NTU_JOINTS}")
            xyz = np.empty((NTU_JOINTS, 3))
            extra = []
            for j in range(NTU_JOINTS):
                lineno, jt = lines.next(f"joint {j}")
                vals = _numbers(jt, lineno, 3, f"joint {j}")
                xyz[j] = vals[:3]
                extra.append(jt[3:])
            bodies.append(NtuBody(meta, xyz, extra))
        skel.frames.append(bodies)
    return skel


def write_ntu_skeleton(skel: NtuSkeleton) -> str:
    out = [str(len(skel.frames))]
    for bodies in skel.frames:
        out.append(str(len(bodies)))
        for b in bodies:
            out.append(" ".join(b.meta))
            out.append(str(len(b.xyz)))
            for j, (x, y, z) in enumerate(b.xyz):
                out.append(" ".join([repr(float(x)), repr(float(y)), repr(float(z)), *b.joint_extra[j]]))
    return "\n".join(out) + "\n"


def random_skeleton(rng: np.random.Generator, n_frames: int, max_bodies: int = 2) -> NtuSkeleton:
    """A structurally valid file with random values, for round-trip testing."""
    skel = NtuSkeleton()
    ids = [str(int(rng.integers(10**16, 10**17))) for _ in range(max_bodies)]
    for _ in range(n_frames):
        bodies = []
        for b in range(int(rng.integers(1, max_bodies + 1))):
            meta = [ids[b]] + [str(int(rng.integers(0, 3))) for _ in range(6)]
            meta += [repr(float(v)) for v in rng.normal(size=2)] + ["2"]
            xyz = rng.normal(size=(NTU_JOINTS, 3)) + np.array([0.0, 0.0, 3.0])
            extra = [
                [repr(float(v)) for v in rng.uniform(0, 500, size=4)]
                + [repr(float(v)) for v in rng.normal(size=4)]
                + ["2"]
                for _ in range(NTU_JOINTS)
            ]
            bodies.append(NtuBody(meta, xyz, extra))
        skel.frames.append(bodies)
    return skel


_ACTION = re.compile(r"A(\d{3})")


def label_from_filename(name: str) -> int | None:
    """NTU names embed the action as ``A###`` (1-based); returns the 0-based class."""
    m = _ACTION.search(Path(name).name)
    return int(m.group(1)) - 1 if m else None


def load_ntu_sequence(path, label: int | None = None) -> ActionSequence:
    path = Path(path)
    skel = parse_ntu_skeleton(path.read_bytes())
    if label is None:
        label = label_from_filename(path.name)
        if label is None:
            raise ValueError(f"cannot infer action class from {path.name!r}; pass a label")
    return ActionSequence(skel.first_body_frames(), label, path.stem)
