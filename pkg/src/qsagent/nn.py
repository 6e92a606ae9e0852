"""Small dense-network engine: forward pass, exact backprop and Adam.

Everything is float64 numpy. Inputs may be a single vector ``(n,)`` or a
batch ``(B, n)``; batched backward sums the per-row gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from qsagent.errors import DivergenceError

LINEAR = "linear"
SIMPLEX = "simplex"
HEADS = (LINEAR, SIMPLEX)


@dataclass
class Mlp:
    layer_sizes: List[int]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    head: str = LINEAR
    # bumped on every in-place parameter update; caches remember it
    version: int = 0

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> List[np.ndarray]:
        """Flat parameter list in (W0, b0, W1, b1, ...) order."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "Mlp":
        return Mlp(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.head,
            self.version,
        )


@dataclass
class ParamGrads:
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def params(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def all_finite(self) -> bool:
        return all(np.isfinite(g).all() for g in self.params())


@dataclass
class ForwardCache:
    inputs: List[np.ndarray]  # input to each layer (post-activation of previous)
    pre: List[np.ndarray]  # pre-activation of each layer
    output: np.ndarray
    batched: bool
    version: int
    layer_sizes: tuple


@dataclass
class OptimizerState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_mlp(cls, mlp: Mlp) -> "OptimizerState":
        return cls(
            [np.zeros_like(p) for p in mlp.params()],
            [np.zeros_like(p) for p in mlp.params()],
        )

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            [a.copy() for a in self.m],
            [a.copy() for a in self.v],
            self.step_count,
            self.beta1,
            self.beta2,
            self.eps,
        )


def init_mlp(layer_sizes: Sequence[int], head: str, rng: np.random.Generator) -> Mlp:
    """Create an MLP with U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases.

    Args:
        layer_sizes: Sizes from input to output, e.g. ``[8, 100, 4]``.
        head: ``"linear"`` or ``"simplex"`` (softmax output).
        rng: Source of the weight draws.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError(f"need at least two layer sizes, got {sizes}")
    if any(s < 1 for s in sizes):
        raise ValueError(f"layer sizes must be positive, got {sizes}")
    if head not in HEADS:
        raise ValueError(f"unknown output head {head!r}")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(sizes, weights, biases, head)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(mlp: Mlp, x) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on ``x`` and keep what backward needs."""
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    if x.ndim not in (1, 2) or x.shape[-1] != mlp.layer_sizes[0]:
        raise ValueError(
            f"input has shape {x.shape}, network expects {mlp.layer_sizes[0]} features"
        )
    a = x if batched else x[None, :]
    inputs, pre = [], []
    last = mlp.n_layers - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        inputs.append(a)
        z = a @ w.T + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < last else z
    out = softmax(a) if mlp.head == SIMPLEX else a
    cache = ForwardCache(inputs, pre, out, batched, mlp.version, tuple(mlp.layer_sizes))
    return (out if batched else out[0]), cache


def predict(mlp: Mlp, x) -> np.ndarray:
    """Forward pass without building a cache."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != mlp.layer_sizes[0]:
        raise ValueError(
            f"input has shape {x.shape}, network expects {mlp.layer_sizes[0]} features"
        )
    a = x
    last = mlp.n_layers - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        a = a @ w.T + b
        if i < last:
            a = np.maximum(a, 0.0)
    return softmax(a) if mlp.head == SIMPLEX else a


def backward(mlp: Mlp, cache: ForwardCache, output_grad) -> ParamGrads:
    """Exact gradients of a scalar loss whose gradient w.r.t. the output is ``output_grad``.

    For the simplex head ``output_grad`` is taken w.r.t. the probabilities and
    pushed through the softmax Jacobian.
    """
    if cache.version != mlp.version or cache.layer_sizes != tuple(mlp.layer_sizes):
        raise ValueError("forward cache is stale or belongs to a different network")
    g = np.asarray(output_grad, dtype=np.float64)
    if not cache.batched:
        g = g[None, :]
    if g.shape != cache.output.shape:
        raise ValueError(f"output_grad shape {g.shape} != output shape {cache.output.shape}")
    if mlp.head == SIMPLEX:
        p = cache.output
        g = p * (g - (g * p).sum(axis=1, keepdims=True))
    n = mlp.n_layers
    gw: list = [None] * n
    gb: list = [None] * n
    for i in range(n - 1, -1, -1):
        if i < n - 1:
            g = g * (cache.pre[i] > 0.0)
        gw[i] = g.T @ cache.inputs[i]
        gb[i] = g.sum(axis=0)
        if i > 0:
            g = g @ mlp.weights[i]
    return ParamGrads(gw, gb)


def zero_grads(mlp: Mlp) -> ParamGrads:
    return ParamGrads([np.zeros_like(w) for w in mlp.weights], [np.zeros_like(b) for b in mlp.biases])


def optimizer_step(mlp: Mlp, grads: ParamGrads, opt: OptimizerState, lr: float):
    """One Adam update, applied in place. Returns ``(mlp, opt)`` for chaining.

    Raises:
        DivergenceError: if any gradient component is non-finite. Nothing is
            modified in that case.
    """
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    params = mlp.params()
    gs = grads.params()
    if len(gs) != len(params) or any(g.shape != p.shape for g, p in zip(gs, params)):
        raise ValueError("gradient shapes do not match the network")
    if not grads.all_finite():
        raise DivergenceError("non-finite gradient")
    opt.step_count += 1
    t = opt.step_count
    c1 = 1.0 - opt.beta1**t
    c2 = 1.0 - opt.beta2**t
    for p, g, m, v in zip(params, gs, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    mlp.version += 1
    return mlp, opt
