"""Slot-mask quality against ground-truth object footprints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PanelSegmentation:
    ious: list  # best-match IoU per ground-truth object
    unused_mass: list  # mask mass (fraction of pixels) of each unassigned slot


def iou(a, b):
    union = np.logical_or(a, b).sum()
    return float(np.logical_and(a, b).sum() / union) if union else 1.0


def segment_panel(masks, objects):
    """Compare soft slot masks (K, H, W) with boolean object masks (n, H, W).

    Every pixel goes to its argmax slot. Each object is matched to the slot
    whose hard mask overlaps it best. The slot holding most background
    pixels counts as the background slot; the remaining slots that match no
    object are "unassigned" and their soft mass is reported.
    """
    k = masks.shape[0]
    hard = masks.argmax(axis=0)
    slot_masks = [hard == s for s in range(k)]
    ious, used = [], set()
    for obj in objects:
        scores = [iou(obj, sm) for sm in slot_masks]
        best = int(np.argmax(scores))
        ious.append(scores[best])
        used.add(best)
    background = ~np.any(objects, axis=0) if len(objects) else np.ones(masks.shape[1:], bool)
    used.add(int(np.argmax([(sm & background).sum() for sm in slot_masks])))
    mass = masks.reshape(k, -1).mean(axis=1)
    unused = [float(mass[s]) for s in range(k) if s not in used]
    return PanelSegmentation(ious, unused)


def summarize(panels):
    """Mean best-match IoU and mean/max unassigned-slot mass over panels."""
    ious = [v for p in panels for v in p.ious]
    unused = [v for p in panels for v in p.unused_mass]
    return {
        "mean_iou": float(np.mean(ious)) if ious else float("nan"),
        "unused_mass_mean": float(np.mean(unused)) if unused else 0.0,
        "unused_mass_max": float(np.max(unused)) if unused else 0.0,
        "n_objects": len(ious),
        "n_unused": len(unused),
    }
