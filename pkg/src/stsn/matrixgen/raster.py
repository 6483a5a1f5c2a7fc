"""Flat 2D rendering of symbolic panels on a 3x3 lattice."""

from __future__ import annotations

import numpy as np

from .symbolic import N_COLORS

MIN_SIZE = 48
# radius as a fraction of the cell's shorter side, per size code
SIZE_RADIUS = (0.18, 0.28, 0.40)
BACKGROUND = 1.0
# 8 gray levels on white, snapped to byte values so files round-trip exactly
GRAY_LEVELS = np.round(np.linspace(0.0, 0.7, N_COLORS) * 255.0) / 255.0


def _cell_box(cell, h, w):
    r, c = divmod(cell, 3)
    return r * h / 3.0, (r + 1) * h / 3.0, c * w / 3.0, (c + 1) * w / 3.0


def shape_mask(obj, h, w):
    """Boolean (H, W) footprint of one object, sampled at pixel centres."""
    y0, y1, x0, x1 = _cell_box(obj.location, h, w)
    cy, cx = (y0 + y1) / 2.0, (x0 + x1) / 2.0
    rad = SIZE_RADIUS[obj.size] * min(y1 - y0, x1 - x0)
    ys = np.arange(h)[:, None] + 0.5
    xs = np.arange(w)[None, :] + 0.5
    dy, dx = ys - cy, xs - cx
    if obj.shape == 0:
        mask = (np.abs(dy) <= rad) & (np.abs(dx) <= rad)
    elif obj.shape == 1:
        mask = dy * dy + dx * dx <= rad * rad
    else:
        # upward triangle: apex at top, base on the bottom edge of the bounding square
        depth = dy + rad
        mask = (depth >= 0) & (dy <= rad) & (np.abs(dx) <= depth / 2.0)
    return mask


def object_masks(panel, h, w):
    """(n_objects, H, W) boolean masks in the panel's object order."""
    if not panel.objects:
        return np.zeros((0, h, w), dtype=bool)
    return np.stack([shape_mask(o, h, w) for o in panel.objects])


def rasterize(panel, h, w, channels=1):
    """Render ``panel`` to a float32 (H, W, C) image in [0, 1], white background."""
    if h < MIN_SIZE or w < MIN_SIZE:
        raise ValueError(f"panels must be at least {MIN_SIZE}x{MIN_SIZE}, got {h}x{w}")
    img = np.full((h, w), BACKGROUND, dtype=np.float32)
    for obj in panel.objects:
        img[shape_mask(obj, h, w)] = GRAY_LEVELS[obj.color]
    return np.repeat(img[:, :, None], channels, axis=2)
