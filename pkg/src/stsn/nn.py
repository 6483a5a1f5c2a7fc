"""Parameter containers and layers."""

from __future__ import annotations

import numpy as np

from . import functional as F
from .tensor import Tensor


def param(data, name=""):
    return Tensor(data, requires_grad=True, name=name)


class Module:
    """Base class that discovers parameters by walking attributes.

    Attribute order is insertion order, so parameter names and their
    enumeration order are stable across runs.
    """

    training = True

    def named_parameters(self, prefix=""):
        out = {}
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                out[name] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(name + "."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{name}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out[f"{name}.{i}"] = item
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def modules(self):
        yield self
        for val in vars(self).values():
            children = val if isinstance(val, (list, tuple)) else [val]
            for child in children:
                if isinstance(child, Module):
                    yield from child.modules()

    def train(self, mode=True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self):
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state, strict=True):
        params = self.named_parameters()
        missing = [k for k in params if k not in state]
        unexpected = [k for k in state if k not in params]
        if strict and (missing or unexpected):
            raise KeyError(f"state mismatch: missing={missing} unexpected={unexpected}")
        for k, p in params.items():
            if k in state:
                arr = np.asarray(state[k])
                if arr.shape != p.shape:
                    raise ValueError(f"shape mismatch for {k}: {arr.shape} vs {p.shape}")
                p.data = arr.astype(p.data.dtype, copy=True)
        return missing


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, d_in, d_out, rng, bias=True):
        self.weight = param(_uniform(rng, d_in, (d_in, d_out)))
        self.bias = param(_uniform(rng, d_in, (d_out,))) if bias else None

    def __call__(self, x):
        return F.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d, eps=1e-5):
        self.gain = param(np.ones(d))
        self.shift = param(np.zeros(d))
        self.eps = eps

    def __call__(self, x):
        return F.layer_norm(x, self.gain, self.shift, self.eps)


class Conv2d(Module):
    """Channels-last convolution with a bias on every output channel."""

    def __init__(self, c_in, c_out, k, rng, stride=1, padding=0):
        # He init: every conv here feeds a ReLU or a linear readout, and the
        # uniform 1/sqrt(fan_in) default lets biases drown the image after 4 layers
        fan_in = c_in * k * k
        self.kernel = param(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(k, k, c_in, c_out)))
        self.bias = param(np.zeros(c_out))
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return F.conv2d(x, self.kernel, self.bias, self.stride, self.padding)


class GRUCell(Module):
    def __init__(self, d, rng):
        self.w_i = param(_uniform(rng, d, (d, 3 * d)))
        self.w_h = param(_uniform(rng, d, (d, 3 * d)))
        self.b_i = param(_uniform(rng, d, (3 * d,)))
        self.b_h = param(_uniform(rng, d, (3 * d,)))

    def __call__(self, h, u):
        return F.gru_cell(h, u, {"w_i": self.w_i, "w_h": self.w_h, "b_i": self.b_i, "b_h": self.b_h})
