"""First-order optimizers operating on :class:`Tensor` parameters in place."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerState:
    kind: str = "adam"
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")


def optimizer_step(state, params, grads=None):
    """Update ``params`` in place from ``grads`` (default: each ``p.grad``).

    Parameters whose gradient is ``None`` are treated as having zero gradient.
    """
    if grads is None:
        grads = [p.grad for p in params]
    grads = [np.zeros_like(p.data) if g is None else g for p, g in zip(params, grads)]
    for p, g in zip(params, grads):
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.data.shape}")
    state.step += 1
    if state.kind == "sgd":
        for p, g in zip(params, grads):
            p.data = p.data - state.lr * g
        return params

    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    b1, b2 = state.betas
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        m, v = state.m[i], state.v[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data = (p.data - update).astype(p.data.dtype, copy=False)
    return params


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.state = OptimizerState("adam", lr, tuple(betas), eps)

    def step(self):
        optimizer_step(self.state, self.params)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


class SGD:
    def __init__(self, params, lr=1e-2):
        self.params = list(params)
        self.state = OptimizerState("sgd", lr)

    def step(self):
        optimizer_step(self.state, self.params)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
