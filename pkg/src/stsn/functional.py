"""Differentiable building blocks with fused backward passes."""

from __future__ import annotations

import numpy as np

from .errors import ContractError, NumericError, ShapeError
from .tensor import Tensor, as_tensor, matmul


def _check_axis(x, axis):
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"axis {axis} out of range for shape {x.shape}")


def softmax(x, axis=-1):
    x = as_tensor(x)
    _check_axis(x, axis)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor._result(out, (x,), backward, "softmax")


def log_softmax(x, axis=-1):
    x = as_tensor(x)
    _check_axis(x, axis)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return Tensor._result(out, (x,), backward, "log_softmax")


def layer_norm(x, gain, shift, eps=1e-5):
    """Normalize over the last axis, then scale by ``gain`` and add ``shift``."""
    x, gain, shift = as_tensor(x), as_tensor(gain), as_tensor(shift)
    d = x.shape[-1]
    if gain.shape != (d,) or shift.shape != (d,):
        raise ShapeError(f"gain/shift must have shape ({d},), got {gain.shape} and {shift.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out = xhat * gain.data + shift.data

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        gg = g.sum(axis=lead) if shift.requires_grad else None
        ggain = (g * xhat).sum(axis=lead) if gain.requires_grad else None
        gx = None
        if x.requires_grad:
            gh = g * gain.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return gx, ggain, gg

    return Tensor._result(out, (x, gain, shift), backward, "layer_norm")


def linear(x, weight, bias=None):
    """``x @ weight + bias`` with ``weight`` stored as (in, out)."""
    out = matmul(x, weight)
    return out if bias is None else out + bias


def _windows(xp, i, k, stride, ho, wo):
    """Columns for kernel row ``i``: shape (B, ho, wo, k*C)."""
    stop_h = i + stride * (ho - 1) + 1
    parts = [xp[:, i:stop_h:stride, j : j + stride * (wo - 1) + 1 : stride, :] for j in range(k)]
    return np.concatenate(parts, axis=-1)


def conv2d(x, kernel, bias=None, stride=1, padding=0):
    """2-D cross-correlation in channels-last layout.

    ``x`` is (B, H, W, C_in) and ``kernel`` is (k_h, k_w, C_in, C_out);
    the result is (B, H_out, W_out, C_out) with
    ``H_out = (H + 2*padding - k_h) // stride + 1``.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if stride < 1 or padding < 0:
        raise ContractError("stride must be >= 1 and padding >= 0")
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError("conv2d expects x (B,H,W,C) and kernel (kh,kw,C_in,C_out)")
    b, h, w, c = x.shape
    kh, kw, cin, cout = kernel.shape
    if cin != c:
        raise ShapeError(f"kernel expects {cin} input channels, input has {c}")
    if kh != kw:
        raise ShapeError("only square kernels are supported")
    k = kh
    if k > h + 2 * padding or k > w + 2 * padding:
        raise ShapeError(f"kernel {k} larger than padded input {(h + 2 * padding, w + 2 * padding)}")
    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1
    if stride == 1:
        return _conv2d_unit_stride(x, kernel, bias, padding, ho, wo)
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding), (0, 0))) if padding else x.data
    wmat = kernel.data.reshape(k, k * c, cout)

    out = np.zeros((b * ho * wo, cout), dtype=x.data.dtype)
    for i in range(k):
        out += _windows(xp, i, k, stride, ho, wo).reshape(-1, k * c) @ wmat[i]
    out = out.reshape(b, ho, wo, cout)
    if bias is not None:
        bias = as_tensor(bias)
        out += bias.data

    def backward(g):
        g2 = g.reshape(-1, cout)
        gk = None
        if kernel.requires_grad:
            gk = np.empty_like(wmat)
            for i in range(k):
                gk[i] = _windows(xp, i, k, stride, ho, wo).reshape(-1, k * c).T @ g2
            gk = gk.reshape(kernel.shape)
        gx = None
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(k):
                cols = (g2 @ wmat[i].T).reshape(b, ho, wo, k, c)
                stop_h = i + stride * (ho - 1) + 1
                for j in range(k):
                    gxp[:, i:stop_h:stride, j : j + stride * (wo - 1) + 1 : stride, :] += cols[:, :, :, j, :]
            gx = gxp[:, padding : padding + h, padding : padding + w, :] if padding else gxp
        grads = (gx, gk)
        if bias is not None:
            grads += (g2.sum(axis=0) if bias.requires_grad else None,)
        return grads

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor._result(out, parents, backward, "conv2d")


def _conv2d_unit_stride(x, kernel, bias, padding, ho, wo):
    # Flatten the padded batch to (B*Hp*Wp, C). Kernel tap (i, j) then reads the
    # contiguous row block shifted by i*Wp + j, so each tap is one plain GEMM.
    # Rows whose (y, x) fall outside (ho, wo) hold garbage and are dropped.
    b, h, w, c = x.shape
    k, cout = kernel.shape[0], kernel.shape[-1]
    hp, wp = h + 2 * padding, w + 2 * padding
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding), (0, 0))) if padding else x.data
    xf = xp.reshape(-1, c)
    rows = xf.shape[0] - (k - 1) * (wp + 1)
    taps = [(i, j, i * wp + j) for i in range(k) for j in range(k)]
    wk = kernel.data
    full = np.zeros((xf.shape[0], cout), dtype=x.data.dtype)
    for i, j, off in taps:
        full[:rows] += xf[off : off + rows] @ wk[i, j]
    out = full.reshape(b, hp, wp, cout)[:, :ho, :wo]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
    else:
        out = np.ascontiguousarray(out)

    def backward(g):
        gf = np.zeros((b, hp, wp, cout), dtype=g.dtype)
        gf[:, :ho, :wo] = g
        gf = gf.reshape(-1, cout)[:rows]
        gk = None
        if kernel.requires_grad:
            gk = np.empty_like(wk)
            for i, j, off in taps:
                gk[i, j] = xf[off : off + rows].T @ gf
        gx = None
        if x.requires_grad:
            gxf = np.zeros_like(xf)
            for i, j, off in taps:
                gxf[off : off + rows] += gf @ wk[i, j].T
            gx = gxf.reshape(b, hp, wp, c)
            gx = gx[:, padding : padding + h, padding : padding + w] if padding else gx
        grads = (gx, gk)
        if bias is not None:
            grads += (g.reshape(-1, cout).sum(axis=0) if bias.requires_grad else None,)
        return grads

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor._result(out, parents, backward, "conv2d")


def dropout(x, rate, rng, training=True):
    if not training or rate <= 0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)
    return x * keep


def gru_cell(h, u, params):
    """One GRU step with state ``h`` and input ``u`` (both width D).

    ``params`` maps ``w_i`` (D, 3D), ``w_h`` (D, 3D), ``b_i`` (3D,), ``b_h``
    (3D,) with gate blocks ordered reset, update, candidate:

        r = sigmoid(u W_ir + b_ir + h W_hr + b_hr)
        z = sigmoid(u W_iz + b_iz + h W_hz + b_hz)
        n = tanh(u W_in + b_in + r * (h W_hn + b_hn))
        h' = (1 - z) * n + z * h
    """
    h, u = as_tensor(h), as_tensor(u)
    d = h.shape[-1]
    if u.shape[-1] != d or params["w_i"].shape != (d, 3 * d):
        raise ShapeError(f"GRU width mismatch: state {h.shape}, input {u.shape}, w_i {params['w_i'].shape}")
    gi = linear(u, params["w_i"], params["b_i"])
    gh = linear(h, params["w_h"], params["b_h"])
    r = (gi[..., :d] + gh[..., :d]).sigmoid()
    z = (gi[..., d : 2 * d] + gh[..., d : 2 * d]).sigmoid()
    n = (gi[..., 2 * d :] + r * gh[..., 2 * d :]).tanh()
    return n + z * (h - n)


def cross_entropy(logits, target):
    """Mean of ``-log softmax(logits)[target]`` over the leading axis."""
    logits = as_tensor(logits)
    target = np.asarray(target, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or target.shape[0] != logits.shape[0]:
        raise ShapeError("cross_entropy expects logits (B, C) and B targets")
    if target.min(initial=0) < 0 or target.max(initial=0) >= logits.shape[1]:
        raise ContractError(f"target index out of range 0..{logits.shape[1] - 1}")
    lp = log_softmax(logits, axis=-1)
    onehot = np.zeros(logits.shape, dtype=logits.data.dtype)
    onehot[np.arange(len(target)), target] = 1
    return -(lp * onehot).sum() * (1.0 / len(target))


def mse(a, b):
    diff = as_tensor(a) - as_tensor(b)
    return (diff * diff).mean()


def check_finite(t, what="tensor"):
    if not np.all(np.isfinite(t.data)):
        raise NumericError(f"non-finite values in {what}")
    return t
