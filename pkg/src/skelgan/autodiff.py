"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every op records its inputs and a backward closure on the output tensor.
Creation order is tracked with a global counter, so sorting reachable
nodes by that counter gives a valid reverse topological order without an
explicit graph object per step.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "DimensionError",
    "DomainError",
    "Tensor",
    "tensor",
    "matmul",
    "linear",
    "add",
    "sub",
    "mul",
    "square",
    "log",
    "neg",
    "scale",
    "relu",
    "tanh",
    "sigmoid",
    "identity",
    "activation",
    "log_sigmoid",
    "concat",
    "take",
    "reshape",
    "sum",
    "mean",
    "grad_check",
    "ACTIVATIONS",
]

_counter = itertools.count()


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class DomainError(ValueError):
    """Input lies outside an op's domain."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op", "_id")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._op = "leaf"
        self._id = next(_counter)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self) -> None:
        backward(self)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data, requires_grad)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: Iterable[Tensor], op: str, backward_fn) -> Tensor:
    parents = tuple(parents)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._op = op
    out._id = next(_counter)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every leaf that requires it."""
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    seen: dict[int, Tensor] = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if t._id in seen:
            continue
        seen[t._id] = t
        stack.extend(p for p in t._parents if p.requires_grad)
    order = sorted(seen.values(), key=lambda t: t._id, reverse=True)
    grads: dict[int, np.ndarray] = {loss._id: np.ones_like(loss.data)}
    for t in order:
        g = grads.pop(t._id, None)
        if g is None:
            continue
        if t._backward is None:
            t.grad = g.copy() if t.grad is None else t.grad + g
            continue
        for p, pg in zip(t._parents, t._backward(g)):
            if pg is None or not p.requires_grad:
                continue
            if p._id in grads:
                grads[p._id] = grads[p._id] + pg
            else:
                grads[p._id] = pg


# ---------------------------------------------------------------- linear algebra


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    A, B = a.data, b.data

    def bw(g):
        return g @ B.T, A.T @ g

    return _node(A @ B, (a, b), "matmul", bw)


def linear(x, w, b) -> Tensor:
    """Fused ``x @ w + b`` with the bias row added to every row of ``x @ w``."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DimensionError(f"linear shape mismatch: {x.shape} @ {w.shape}")
    if b.shape != (w.shape[1],):
        raise DimensionError(f"bias shape {b.shape} does not match weight {w.shape}")
    X, W = x.data, w.data

    def bw(g):
        return g @ W.T, X.T @ g, g.sum(axis=0)

    return _node(X @ W + b.data, (x, w, b), "linear", bw)


# ---------------------------------------------------------------- elementwise


def _check_binary(a: Tensor, b: Tensor, name: str) -> None:
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise DimensionError(f"{name} shape mismatch: {a.shape} vs {b.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.asarray(g.sum()).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary(a, b, "add")
    sa, sb = a.shape, b.shape
    return _node(a.data + b.data, (a, b), "add", lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _node(a.data - b.data, (a, b), "sub", lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary(a, b, "mul")
    A, B = a.data, b.data
    return _node(A * B, (a, b), "mul", lambda g: (_unbroadcast(g * B, A.shape), _unbroadcast(g * A, B.shape)))


def square(a) -> Tensor:
    a = _as_tensor(a)
    A = a.data
    return _node(A * A, (a,), "square", lambda g: (2.0 * A * g,))


def log(a) -> Tensor:
    a = _as_tensor(a)
    A = a.data
    if np.any(A <= 0):
        raise DomainError("log of non-positive value")
    return _node(np.log(A), (a,), "log", lambda g: (g / A,))


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _node(-a.data, (a,), "neg", lambda g: (-g,))


def scale(a, k: float) -> Tensor:
    a = _as_tensor(a)
    k = float(k)
    return _node(a.data * k, (a,), "scale", lambda g: (g * k,))


# ---------------------------------------------------------------- activations


def relu(a) -> Tensor:
    a = _as_tensor(a)
    # subgradient at exactly 0 is 0
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), (a,), "relu", lambda g: (g * mask,))


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    y = np.tanh(a.data)
    return _node(y, (a,), "tanh", lambda g: (g * (1.0 - y * y),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # branch-free stable form
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    y = _sigmoid(a.data)
    return _node(y, (a,), "sigmoid", lambda g: (g * y * (1.0 - y),))


def identity(a) -> Tensor:
    return _as_tensor(a)


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "linear": identity,
}


def activation(kind: str, x) -> Tensor:
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return fn(x)


def log_sigmoid(a) -> Tensor:
    """``log(sigmoid(a))`` computed without forming the probability."""
    a = _as_tensor(a)
    x = a.data
    y = np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))
    s = _sigmoid(x)
    return _node(y, (a,), "log_sigmoid", lambda g: (g * (1.0 - s),))


# ---------------------------------------------------------------- structure


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise DimensionError("concat of empty list")
    ndim = parts[0].data.ndim
    ax = axis % ndim if ndim else 0
    for p in parts[1:]:
        if p.data.ndim != ndim or any(
            p.shape[i] != parts[0].shape[i] for i in range(ndim) if i != ax
        ):
            raise DimensionError(
                f"concat extent mismatch on axis {axis}: {[q.shape for q in parts]}"
            )
    sizes = [p.shape[ax] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        return [
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(parts))
        ]

    return _node(np.concatenate([p.data for p in parts], axis=ax), parts, "concat", bw)


def take(a, start: int, stop: int, axis: int = 0) -> Tensor:
    """Contiguous slice ``[start:stop]`` along ``axis``."""
    a = _as_tensor(a)
    ax = axis % a.data.ndim
    if not 0 <= start <= stop <= a.shape[ax]:
        raise DimensionError(f"slice [{start}:{stop}] out of range for axis {axis} of {a.shape}")
    index = [slice(None)] * a.data.ndim
    index[ax] = slice(start, stop)
    index = tuple(index)
    shape = a.shape

    def bw(g):
        out = np.zeros(shape)
        out[index] = g
        return (out,)

    return _node(a.data[index].copy(), (a,), "take", bw)


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    old = a.shape
    try:
        y = a.data.reshape(tuple(shape))
    except ValueError as exc:
        raise DimensionError(f"cannot reshape {old} to {tuple(shape)}") from exc
    return _node(y, (a,), "reshape", lambda g: (g.reshape(old),))


# ---------------------------------------------------------------- reductions


def _reduce_grad(g: np.ndarray, shape: tuple[int, ...], axis: int | None, k: float) -> np.ndarray:
    if axis is not None:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g / k, shape).copy()


def sum(a, axis: int | None = None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    a = _as_tensor(a)
    if axis is not None and not -a.data.ndim <= axis < a.data.ndim:
        raise DimensionError(f"axis {axis} out of range for shape {a.shape}")
    shape = a.shape
    ax = None if axis is None else axis % a.data.ndim
    return _node(
        np.asarray(a.data.sum(axis=ax)), (a,), "sum", lambda g: (_reduce_grad(g, shape, ax, 1.0),)
    )


def mean(a, axis: int | None = None) -> Tensor:
    a = _as_tensor(a)
    if axis is not None and not -a.data.ndim <= axis < a.data.ndim:
        raise DimensionError(f"axis {axis} out of range for shape {a.shape}")
    shape = a.shape
    ax = None if axis is None else axis % a.data.ndim
    k = float(a.size if ax is None else shape[ax])
    return _node(
        np.asarray(a.data.mean(axis=ax)), (a,), "mean", lambda g: (_reduce_grad(g, shape, ax, k),)
    )


# ---------------------------------------------------------------- verification


def grad_check(f: Callable[[Tensor], Tensor], x, eps: float = 1e-6) -> float:
    """Largest |autodiff - central difference| / max(1, |central difference|).

    ``f`` must map a tensor to a scalar tensor. Points where ``f`` has a kink
    (relu at exactly 0, for example) give meaningless results; callers pick
    evaluation points away from them.
    """
    base = np.array(_as_tensor(x).data, dtype=np.float64)
    leaf = Tensor(base.copy(), requires_grad=True)
    out = f(leaf)
    backward(out)
    analytic = np.zeros_like(base) if leaf.grad is None else leaf.grad
    numeric = np.zeros_like(base)
    flat = numeric.reshape(-1)
    for i in range(base.size):
        bumped = base.copy().reshape(-1)
        bumped[i] += eps
        hi = f(Tensor(bumped.reshape(base.shape))).item()
        bumped[i] -= 2 * eps
        lo = f(Tensor(bumped.reshape(base.shape))).item()
        flat[i] = (hi - lo) / (2 * eps)
    err = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
    return float(err.max()) if err.size else 0.0
