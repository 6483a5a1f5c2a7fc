"""Slot attention: competitive binding of K slots to encoder feature locations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F
from .nn import GRUCell, LayerNorm, Linear, Module, param
from .tensor import Tensor, as_tensor

WEIGHT_FLOOR = 1e-8


@dataclass
class SlotSet:
    slots: Tensor  # (P, K, D_slot)
    attn: Tensor  # (P, K, N); sums to 1 over K at every location

    @property
    def num_slots(self):
        return self.slots.shape[-2]


def init_slots(k, mu, log_sigma, rng=None, batch=()):
    """Draw ``batch + (k, D)`` slots as ``mu + exp(log_sigma) * N(0, 1)``.

    With ``rng=None`` every slot is set to ``mu`` (deterministic inference).
    """
    mu, log_sigma = as_tensor(mu), as_tensor(log_sigma)
    shape = tuple(batch) + (k, mu.shape[-1])
    if rng is None:
        return mu.broadcast_to(shape)
    noise = Tensor(rng.standard_normal(shape))
    return mu + log_sigma.exp() * noise


class SlotAttention(Module):
    def __init__(self, d_inputs, d_slot, rng, iters=3):
        self.d_slot = d_slot
        self.iters = iters
        bound = np.sqrt(6.0 / (1 + d_slot))
        self.mu = param(rng.uniform(-bound, bound, d_slot))
        self.log_sigma = param(rng.uniform(-bound, bound, d_slot))
        self.norm_inputs = LayerNorm(d_inputs)
        self.norm_slots = LayerNorm(d_slot)
        self.norm_mlp = LayerNorm(d_slot)
        self.q = Linear(d_slot, d_slot, rng, bias=False)
        self.k = Linear(d_inputs, d_slot, rng, bias=False)
        self.v = Linear(d_inputs, d_slot, rng, bias=False)
        self.gru = GRUCell(d_slot, rng)
        self.mlp1 = Linear(d_slot, d_slot, rng)
        self.mlp2 = Linear(d_slot, d_slot, rng)

    def project_inputs(self, inputs):
        x = self.norm_inputs(as_tensor(inputs))
        return self.k(x), self.v(x)

    def step(self, slots, keys, values):
        """One round of attention + GRU + residual MLP. Returns (slots, attn (P, N, K))."""
        q = self.q(self.norm_slots(slots))
        logits = (keys @ q.swapaxes(-1, -2)) * (1.0 / np.sqrt(self.d_slot))
        F.check_finite(logits, "attention logits")
        attn = F.softmax(logits, axis=-1)
        weights = attn / (attn.sum(axis=-2, keepdims=True) + WEIGHT_FLOOR)
        updates = weights.swapaxes(-1, -2) @ values
        slots = self.gru(slots, updates)
        return slots + self.mlp2(self.mlp1(self.norm_mlp(slots)).relu()), attn

    def __call__(self, inputs, k, rng=None, init=None):
        """Bind ``k`` slots to ``inputs`` (P, N, D_inputs) over ``self.iters`` rounds."""
        inputs = as_tensor(inputs)
        batch = inputs.shape[:-2]
        keys, values = self.project_inputs(inputs)
        slots = init if init is not None else init_slots(k, self.mu, self.log_sigma, rng, batch)
        n = inputs.shape[-2]
        attn = Tensor(np.full(batch + (n, k), 1.0 / k))
        for _ in range(self.iters):
            slots, attn = self.step(slots, keys, values)
        return SlotSet(slots, attn.swapaxes(-1, -2))

    def mean_value_slots(self, inputs):
        """Single-slot replacement: the spatial mean of value embeddings."""
        _, values = self.project_inputs(inputs)
        n = values.shape[-2]
        slots = values.mean(axis=-2, keepdims=True)
        attn = Tensor(np.ones(values.shape[:-2] + (1, n)))
        return SlotSet(slots, attn)


def slot_attention_step(slots, inputs, sa):
    """Functional single step: returns (new slots, attention (K, N) over slots)."""
    keys, values = sa.project_inputs(inputs)
    new, attn = sa.step(as_tensor(slots), keys, values)
    return new, attn.swapaxes(-1, -2)


def encode_to_slots(img, encoder, sa, k, rng=None):
    """Encode one panel ``img`` (H, W) or (H, W, C) into a :class:`SlotSet` of K slots."""
    x = as_tensor(img)
    if x.ndim == 2:
        x = x.reshape(x.shape + (1,))
    out = sa(encoder(x.reshape((1,) + x.shape)), k, rng)
    return SlotSet(out.slots.reshape(out.slots.shape[1:]), out.attn.reshape(out.attn.shape[1:]))
