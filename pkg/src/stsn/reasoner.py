"""Transformer scoring of candidate answers over context + candidate slots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F
from .errors import ContractError, ShapeError
from .nn import LayerNorm, Linear, Module, param
from .tensor import Tensor, as_tensor, concat

N_CONTEXT = 8
N_CANDIDATES = 8


def tcn(seq, gain, shift, eps=1e-5):
    """Temporal context normalization over the sequence axis (-2), per feature."""
    seq, gain, shift = as_tensor(seq), as_tensor(gain), as_tensor(shift)
    if seq.ndim < 2 or seq.shape[-2] < 2:
        raise ContractError("TCN needs a sequence of at least 2 elements")
    mu = seq.data.mean(axis=-2, keepdims=True)
    xc = seq.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-2, keepdims=True) + eps)
    xhat = xc * inv

    def backward(g):
        return (inv * (g - g.mean(axis=-2, keepdims=True) - xhat * (g * xhat).mean(axis=-2, keepdims=True)),)

    normed = Tensor._result(xhat, (seq,), backward, "tcn")
    return normed * gain + shift


def row_col_onehot(index):
    """One-hot (row, column) code of matrix cell ``index``.

    Indices 0..7 are the context cells in row-major order and 8 is the
    candidate in the bottom-right cell.
    """
    if not 0 <= index <= 8:
        raise ContractError(f"panel index {index} outside 0..8")
    code = np.zeros(6)
    code[index // 3] = 1
    code[3 + index % 3] = 1
    return code


@dataclass
class ScoreVector:
    scores: Tensor  # (..., 8)

    @property
    def probs(self):
        return F.softmax(self.scores, axis=-1).data

    @property
    def prediction(self):
        return np.argmax(self.scores.data, axis=-1)


class Attention(Module):
    def __init__(self, d_model, n_heads, d_head, rng):
        self.n_heads = n_heads
        self.d_head = d_head
        self.qkv = Linear(d_model, 3 * n_heads * d_head, rng)
        self.proj = Linear(n_heads * d_head, d_model, rng)

    def __call__(self, x, rate, rng):
        m, s, _ = x.shape
        h, dh = self.n_heads, self.d_head
        qkv = self.qkv(x).reshape(m, s, 3, h, dh).transpose(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        att = F.softmax((q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dh)), axis=-1)
        att = F.dropout(att, rate, rng, self.training)
        out = (att @ v).transpose(0, 2, 1, 3).reshape(m, s, h * dh)
        return self.proj(out)


class Block(Module):
    """Pre-norm residual block: x + attn(LN(x)), then x + MLP(LN(x))."""

    def __init__(self, d_model, n_heads, d_head, d_mlp, rng):
        self.norm1 = LayerNorm(d_model)
        self.attn = Attention(d_model, n_heads, d_head, rng)
        self.norm2 = LayerNorm(d_model)
        self.fc1 = Linear(d_model, d_mlp, rng)
        self.fc2 = Linear(d_mlp, d_model, rng)

    def __call__(self, x, rate, rng):
        x = x + self.attn(self.norm1(x), rate, rng)
        hidden = F.dropout(self.fc1(self.norm2(x)).relu(), rate, rng, self.training)
        return x + self.fc2(hidden)


class Reasoner(Module):
    def __init__(self, d_slot, rng, n_layers=6, n_heads=8, d_head=32, d_mlp=512, dropout=0.0, use_tcn=True, tcn_eps=1e-5):
        self.d_slot = d_slot
        self.dropout = dropout
        self.use_tcn = use_tcn
        self.tcn_eps = tcn_eps
        self.tcn_gain = param(np.ones(d_slot))
        self.tcn_shift = param(np.zeros(d_slot))
        self.rowcol = Linear(6, d_slot, rng)
        self.cls = param(rng.normal(0.0, 0.02, d_slot))
        self.blocks = [Block(d_slot, n_heads, d_head, d_mlp, rng) for _ in range(n_layers)]
        self.norm_out = LayerNorm(d_slot)
        self.head = Linear(d_slot, 1, rng)

    def _positions(self, k):
        codes = np.repeat(np.stack([row_col_onehot(i) for i in range(9)]), k, axis=0)
        return self.rowcol(Tensor(codes))

    def score(self, context, candidates, rng=None):
        """Score candidate slot sets against the context.

        ``context`` is (B, 8, K, D) and ``candidates`` (B, M, K, D); each of the
        M candidates is scored independently. Returns (B, M) scores.
        """
        context, candidates = as_tensor(context), as_tensor(candidates)
        if context.ndim != 4 or candidates.ndim != 4:
            raise ShapeError("expected context (B, 8, K, D) and candidates (B, M, K, D)")
        b, n_ctx, k, d = context.shape
        m = candidates.shape[1]
        if n_ctx != N_CONTEXT or candidates.shape[0] != b or candidates.shape[2:] != (k, d) or d != self.d_slot:
            raise ShapeError(f"slot sets disagree: context {context.shape}, candidates {candidates.shape}")
        ctx = context.reshape(b, 1, N_CONTEXT * k, d).broadcast_to((b, m, N_CONTEXT * k, d))
        seq = concat([ctx, candidates], axis=2)
        if self.use_tcn:
            seq = tcn(seq, self.tcn_gain, self.tcn_shift, self.tcn_eps)
        seq = seq + self._positions(k)
        cls = self.cls.reshape(1, 1, 1, d).broadcast_to((b, m, 1, d))
        x = concat([cls, seq], axis=2).reshape(b * m, 9 * k + 1, d)
        rate = self.dropout if self.training else 0.0
        for block in self.blocks:
            x = block(x, rate, rng)
        out = self.head(self.norm_out(x[:, 0]))
        return out.reshape(b, m)

    def predict(self, context, candidates, rng=None):
        return ScoreVector(self.score(context, candidates, rng))


def score_candidate(context, candidate, reasoner, rng=None):
    """Scalar score of one candidate (K, D) against context slots (8, K, D)."""
    context, candidate = as_tensor(context), as_tensor(candidate)
    k, d = candidate.shape
    return reasoner.score(context.reshape(1, N_CONTEXT, k, d), candidate.reshape(1, 1, k, d), rng).reshape(())


def predict(context, candidates, reasoner, rng=None):
    """:class:`ScoreVector` for one problem: context (8, K, D), candidates (8, K, D)."""
    context, candidates = as_tensor(context), as_tensor(candidates)
    k, d = context.shape[-2:]
    scores = reasoner.score(context.reshape(1, N_CONTEXT, k, d), candidates.reshape(1, -1, k, d), rng)
    return ScoreVector(scores.reshape(-1))


def task_loss(scores, y):
    """Cross entropy between answer index ``y`` and softmax-normalized ``scores``."""
    scores = as_tensor(scores)
    if scores.ndim == 1:
        scores = scores.reshape(1, -1)
    y = np.atleast_1d(np.asarray(y))
    if np.any((y < 0) | (y >= scores.shape[-1])):
        raise ContractError(f"answer index outside 0..{scores.shape[-1] - 1}")
    return F.cross_entropy(scores, y)


def total_loss(recon, task, lam):
    if lam < 0:
        raise ContractError("reconstruction weight must be non-negative")
    return recon * lam + task
