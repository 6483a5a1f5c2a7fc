"""Problem-level image augmentation: one transform shared by all 16 panels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BRIGHTNESS_RANGE = (0.5, 1.5)


@dataclass(frozen=True)
class Transform:
    hflip: bool = False
    vflip: bool = False
    rot90: int = 0  # quarter turns counter-clockwise
    brightness: float = 1.0

    @property
    def is_identity(self):
        return not self.hflip and not self.vflip and self.rot90 % 4 == 0 and self.brightness == 1.0


def sample_transform(rng):
    return Transform(
        hflip=bool(rng.integers(2)),
        vflip=bool(rng.integers(2)),
        rot90=int(rng.integers(4)),
        brightness=float(rng.uniform(*BRIGHTNESS_RANGE)),
    )


def apply_transform(images, t):
    """Apply ``t`` to (..., H, W, C) images. Brightness scales the distance from white."""
    out = images
    if t.hflip:
        out = out[..., :, ::-1, :]
    if t.vflip:
        out = out[..., ::-1, :, :]
    if t.rot90 % 4:
        out = np.rot90(out, k=t.rot90, axes=(-3, -2))
    if t.brightness != 1.0:
        out = np.clip(1.0 - t.brightness * (1.0 - out), 0.0, 1.0)
    return np.ascontiguousarray(out, dtype=images.dtype)


def augment(images, rng):
    """Return (augmented images, transform); labels and rules are untouched."""
    t = sample_transform(rng)
    return apply_transform(images, t), t
