"""Small dense networks with hand-written backprop and Adam.

Inputs are batched row-wise: ``x`` has shape (batch, in_dim); a 1-D vector is
treated as a batch of one and the output is squeezed back.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    """Raised when a loss or gradient stops being finite."""


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass
class Dense:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class Mlp:
    layers: list[Dense]
    precision: str = "fp32"

    @classmethod
    def build(cls, sizes: list[int], activations: list[str], rng: np.random.Generator) -> "Mlp":
        """He-uniform weights (bound sqrt(6 / fan_in)), zero biases."""
        if len(activations) != len(sizes) - 1:
            raise ShapeError("need one activation per layer")
        layers = []
        for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            layers.append(Dense(w, np.zeros(fan_out), act))
        net = cls(layers)
        net.check()
        return net

    @classmethod
    def zeros(cls, sizes: list[int], activations: list[str]) -> "Mlp":
        return cls([Dense(np.zeros((o, i)), np.zeros(o), a)
                    for i, o, a in zip(sizes[:-1], sizes[1:], activations)])

    def check(self) -> None:
        for a, b in zip(self.layers[:-1], self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        for layer in self.layers:
            if layer.bias.shape != (layer.out_dim,):
                raise ShapeError("bias shape does not match weight rows")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order (W0, b0, W1, b1, ...); views, not copies."""
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            out.append((f"layers.{i}.weight", layer.weight))
            out.append((f"layers.{i}.bias", layer.bias))
        return out

    def copy(self) -> "Mlp":
        return copy.deepcopy(self)

    def _as_batch(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"expected input width {self.in_dim}, got shape {x.shape}")
        return x, single

    def forward(self, x) -> np.ndarray:
        y, _ = self.forward_cache(x)
        return y

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)

    def forward_cache(self, x):
        """Forward pass keeping what backward needs."""
        a, single = self._as_batch(x)
        cache = [a]
        for layer in self.layers:
            z = a @ layer.weight.T + layer.bias
            a = _act(layer.activation, z)
            cache.append((z, a))
        return (a[0] if single else a), (cache, single)

    def backward(self, cache, upstream) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of ``sum(upstream * output)`` w.r.t. every parameter and the input."""
        acts, single = cache
        g = np.asarray(upstream, dtype=float)
        if single:
            g = g[None, :]
        grads: list[np.ndarray] = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            z, a = acts[i + 1]
            a_prev = acts[i] if i == 0 else acts[i][1]
            dz = g * _act_grad(layer.activation, z, a)
            grads[2 * i] = dz.T @ a_prev
            grads[2 * i + 1] = dz.sum(axis=0)
            g = dz @ layer.weight
        return grads, (g[0] if single else g)


def forward(net: Mlp, x) -> np.ndarray:
    return net.forward(x)


def backward(net: Mlp, x, upstream) -> tuple[list[np.ndarray], np.ndarray]:
    _, cache = net.forward_cache(x)
    return net.backward(cache, upstream)


def mse(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient w.r.t. ``pred``."""
    diff = np.asarray(pred, dtype=float) - np.asarray(target, dtype=float)
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: Mlp, lr: float, **kw) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(p) for p in net.params()],
                   v=[np.zeros_like(p) for p in net.params()], **kw)


def adam_step(net: Mlp, grads: list[np.ndarray], opt: AdamState) -> tuple[Mlp, AdamState]:
    """One in-place Adam update of ``net``'s parameters."""
    params = net.params()
    if len(grads) != len(params) or len(opt.m) != len(params):
        raise ShapeError("gradient / optimizer state does not match the network")
    for g, p in zip(grads, params):
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient")
    opt.t += 1
    c1 = 1.0 - opt.beta1 ** opt.t
    c2 = 1.0 - opt.beta2 ** opt.t
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    return net, opt
