"""Dense layers, MLP stacks and the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

ACTIVATION_KINDS = ("relu", "tanh", "sigmoid", "linear")


@dataclass
class DenseLayer:
    weight: Tensor
    bias: Tensor
    activation: str = "linear"

    def __post_init__(self):
        if self.activation not in ACTIVATION_KINDS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.data.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ad.DimensionError(
                f"bias {self.bias.shape} inconsistent with weight {self.weight.shape}"
            )

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        return ad.activation(self.activation, ad.linear(x, self.weight, self.bias))


@dataclass
class Mlp:
    layers: list[DenseLayer] = field(default_factory=list)

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ad.DimensionError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> list[Tensor]:
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = []
        for i, layer in enumerate(self.layers):
            out.append((f"{prefix}{i}.weight", layer.weight))
            out.append((f"{prefix}{i}.bias", layer.bias))
        return out

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def __call__(self, x: Tensor) -> Tensor:
        return forward(self, x)


def init_mlp(dims: list[int], activations: list[str], seed) -> Mlp:
    """Xavier-uniform weights, zero biases. ``seed`` may be an int or a Generator."""
    if not dims:
        raise ValueError("init_mlp needs at least one dimension")
    if len(activations) != len(dims) - 1:
        raise ValueError(
            f"need {len(dims) - 1} activations for dims {dims}, got {len(activations)}"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(dims, dims[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append(
            DenseLayer(Tensor(w, requires_grad=True), Tensor(np.zeros(fan_out), requires_grad=True), act)
        )
    return Mlp(layers)


def forward(mlp: Mlp, x: Tensor) -> Tensor:
    x = ad.tensor(x)
    if x.shape[-1] != mlp.in_dim:
        raise ad.DimensionError(f"input last dim {x.shape[-1]} != mlp input dim {mlp.in_dim}")
    squeeze = x.data.ndim == 1
    h = ad.reshape(x, (1, x.shape[0])) if squeeze else x
    for layer in mlp.layers:
        h = layer(h)
    return ad.reshape(h, (h.shape[1],)) if squeeze else h


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], lr: float = 1e-3, **kw) -> "AdamState":
        return cls(
            lr=lr,
            m=[np.zeros(p.shape) for p in params],
            v=[np.zeros(p.shape) for p in params],
            **kw,
        )


def adam_step(params: list[Tensor], grads: list[np.ndarray | None], state: AdamState) -> None:
    """One bias-corrected Adam update, in place. A ``None`` grad counts as zero."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state lengths differ")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros(p.shape)
        if g.shape != p.shape or state.m[i].shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """Convenience wrapper binding a parameter list to its :class:`AdamState`."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3, **kw):
        self.params = list(params)
        self.state = AdamState.for_params(self.params, lr=lr, **kw)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state)
