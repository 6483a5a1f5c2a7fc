"""ADAM with bias-corrected moments and a linear warmup schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_update(params, grads, state, lr):
    """Apply one ADAM step in place.

    ``params`` and ``grads`` are dicts of arrays keyed by name; a missing or
    ``None`` gradient leaves that parameter (and its moments) untouched.
    Returns ``(params, state)``.
    """
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype, copy=False)
    return params, state


class Adam:
    """Optimizer over a dict of parameter tensors."""

    def __init__(self, named_params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(named_params)
        self.state = AdamState(beta1=beta1, beta2=beta2, eps=eps)

    def step(self, lr):
        arrays = {k: p.data for k, p in self.params.items()}
        grads = {k: p.grad for k, p in self.params.items() if p.grad is not None}
        adam_update(arrays, grads, self.state, lr)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


def warmup_lr(step, base_lr, warmup_steps):
    """Linear ramp from 0 at step 0 to ``base_lr`` at ``warmup_steps``, flat after."""
    if warmup_steps <= 0:
        return base_lr
    return base_lr * min(1.0, step / warmup_steps)
