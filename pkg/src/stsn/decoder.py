"""Spatial broadcast decoder and softmax-mask compositing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F
from .encoder import position_grid
from .errors import ShapeError
from .nn import Conv2d, Linear, Module
from .tensor import Tensor, as_tensor, stack


@dataclass
class SlotRender:
    recon: Tensor  # (..., H, W, C_img)
    mask_logit: Tensor  # (..., H, W, 1)


def spatial_broadcast(slot, h, w):
    """Tile a (D,) slot into a (D, H, W) feature map."""
    slot = as_tensor(slot)
    if h < 1 or w < 1:
        raise ShapeError("broadcast extent must be >= 1")
    return slot.reshape(slot.shape[-1], 1, 1).broadcast_to((slot.shape[-1], h, w))


def _valid_taps(size, k, padding):
    """(k, size) indicator: tap i contributes at output position y."""
    y = np.arange(size)[None, :]
    i = np.arange(k)[:, None]
    src = y + i - padding
    return ((src >= 0) & (src < size)).astype(np.float64)


class SlotDecoder(Module):
    def __init__(self, image_size, d_slot, rng, channels=32, n_conv=3, image_channels=1):
        self.image_size = image_size
        self.d_slot = d_slot
        self.image_channels = image_channels
        self.pos = Linear(4, d_slot, rng)
        self.convs = []
        c_prev = d_slot
        for _ in range(n_conv):
            self.convs.append(Conv2d(c_prev, channels, 5, rng, stride=1, padding=2))
            c_prev = channels
        self.out = Conv2d(c_prev, image_channels + 1, 3, rng, stride=1, padding=1)
        self._grid = position_grid(image_size, image_size)
        rows = _valid_taps(image_size, 5, 2)
        self._taps = Tensor(np.einsum("iy,jx->yxij", rows, rows).reshape(image_size * image_size, 25))

    def _first_layer(self, slots):
        # conv(broadcast(s) + P) = conv(P) + s @ G, where G sums each kernel over the
        # taps that land inside the zero-padded image at every output pixel.
        conv = self.convs[0]
        h = w = self.image_size
        m, d = slots.shape
        c = conv.kernel.shape[-1]
        pos_field = self.pos(self._grid).reshape(1, h, w, d)
        base = conv(pos_field)
        basis = (self._taps @ conv.kernel.reshape(25, d * c)).reshape(h * w, d, c)
        basis = basis.transpose(1, 0, 2).reshape(d, h * w * c)
        return base + (slots @ basis).reshape(m, h, w, c)

    def __call__(self, slots):
        """Decode ``slots`` (M, D) into a :class:`SlotRender` of (M, H, W, .) maps."""
        slots = as_tensor(slots)
        if slots.ndim != 2 or slots.shape[1] != self.d_slot:
            raise ShapeError(f"decoder expects (M, {self.d_slot}) slots, got {slots.shape}")
        x = self._first_layer(slots).relu()
        for conv in self.convs[1:]:
            x = conv(x).relu()
        return self._split(self.out(x))

    def reference(self, slots):
        """Direct broadcast -> add position -> conv stack, without the first-layer shortcut."""
        slots = as_tensor(slots)
        m, d = slots.shape
        h = w = self.image_size
        x = slots.reshape(m, 1, 1, d).broadcast_to((m, h, w, d)) + self.pos(self._grid)
        for conv in self.convs:
            x = conv(x).relu()
        return self._split(self.out(x))

    def _split(self, out):
        c = self.image_channels
        return SlotRender(out[..., :c], out[..., c:])


def decode_slot(slot, decoder):
    """Decode one (D,) slot into an (H, W, C) reconstruction and (H, W, 1) mask logit."""
    r = decoder(as_tensor(slot).reshape(1, -1))
    return SlotRender(r.recon.reshape(r.recon.shape[1:]), r.mask_logit.reshape(r.mask_logit.shape[1:]))


def composite(recons, mask_logits):
    """Blend K slot renders with a per-pixel softmax over the slot axis.

    ``recons`` is (..., K, H, W, C) and ``mask_logits`` (..., K, H, W, 1).
    Returns (image (..., H, W, C), masks (..., K, H, W, 1)).
    """
    recons, mask_logits = as_tensor(recons), as_tensor(mask_logits)
    if recons.shape[:-1] != mask_logits.shape[:-1]:
        raise ShapeError(f"render shapes disagree: {recons.shape} vs {mask_logits.shape}")
    masks = F.softmax(mask_logits, axis=-4)
    return (masks * recons).sum(axis=-4), masks


def composite_renders(renders):
    """:func:`composite` over a list of per-slot :class:`SlotRender` objects."""
    return composite(stack([r.recon for r in renders]), stack([r.mask_logit for r in renders]))


def reconstruction_loss(panels, recons):
    """Mean squared error over every panel and pixel."""
    panels, recons = as_tensor(panels), as_tensor(recons)
    if panels.shape != recons.shape:
        raise ShapeError(f"panel/reconstruction shapes differ: {panels.shape} vs {recons.shape}")
    return F.mse(recons, panels)
