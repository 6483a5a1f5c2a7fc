"""Convolutional panel encoder producing the flattened feature map for slot attention."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .nn import Conv2d, LayerNorm, Linear, Module
from .tensor import Tensor, as_tensor

def build_position_embedding(h, w):
    """Four ramps over the grid, shape (4, H, W).

    Channel order: top->bottom, bottom->top, left->right, right->left,
    each linear in its direction and spanning [0, 1].
    """
    if h < 1 or w < 1:
        raise ShapeError("position embedding needs H, W >= 1")
    rows = np.linspace(0.0, 1.0, h) if h > 1 else np.zeros(1)
    cols = np.linspace(0.0, 1.0, w) if w > 1 else np.zeros(1)
    ry = np.broadcast_to(rows[:, None], (h, w))
    rx = np.broadcast_to(cols[None, :], (h, w))
    return Tensor(np.stack([ry, 1.0 - ry, rx, 1.0 - rx]))


def position_grid(h, w):
    """Channels-last view of :func:`build_position_embedding`, shape (H, W, 4)."""
    return Tensor(build_position_embedding(h, w).data.transpose(1, 2, 0))


class Encoder(Module):
    """4x (conv5x5 + ReLU) -> + projected position -> flatten -> LN -> 1x1 conv, ReLU, 1x1 conv."""

    def __init__(self, image_size, rng, channels=32, image_channels=1, n_conv=4):
        self.image_size = image_size
        self.image_channels = image_channels
        self.channels = channels
        c_prev = image_channels
        self.convs = []
        for _ in range(n_conv):
            self.convs.append(Conv2d(c_prev, channels, 5, rng, stride=1, padding=2))
            c_prev = channels
        self.pos = Linear(4, channels, rng)
        self.norm = LayerNorm(channels)
        # 1-D convolutions with kernel 1 act per location, i.e. as linear maps
        self.mlp1 = Linear(channels, channels, rng)
        self.mlp2 = Linear(channels, channels, rng)
        self._grid = position_grid(image_size, image_size)

    @property
    def d_inputs(self):
        return self.channels

    def __call__(self, images):
        """``images`` (P, H, W, C) -> features (P, H*W, D_inputs)."""
        x = as_tensor(images)
        if x.ndim == 3:
            x = x.reshape(x.shape + (1,))
        p, h, w, c = x.shape
        if (h, w, c) != (self.image_size, self.image_size, self.image_channels):
            raise ShapeError(
                f"encoder configured for {self.image_size}x{self.image_size}x{self.image_channels}, got {h}x{w}x{c}"
            )
        for conv in self.convs:
            x = conv(x).relu()
        x = x + self.pos(self._grid)
        x = x.reshape(p, h * w, self.channels)
        x = self.norm(x)
        return self.mlp2(self.mlp1(x).relu())


def encode_panel(img, encoder):
    """Encode a single (H, W) or (H, W, C) panel into its (N, D_inputs) feature map."""
    x = as_tensor(img)
    if x.ndim == 2:
        x = x.reshape(x.shape + (1,))
    return encoder(x.reshape((1,) + x.shape)).reshape(-1, encoder.channels)
