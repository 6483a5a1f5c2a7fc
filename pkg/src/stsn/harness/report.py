"""Report directory: loss/accuracy CSVs, slot reconstruction grids, summary table."""

from __future__ import annotations

import csv
import os

import numpy as np

from ..matrixgen.raster import object_masks
from ..tensor import no_grad
from .segmentation import segment_panel, summarize


def write_pnm(path, image):
    """Binary PGM (1 channel) or PPM (3 channels) from floats in [0, 1]."""
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[..., None]
    h, w, c = image.shape
    if c not in (1, 3):
        raise ValueError(f"cannot write {c}-channel image")
    data = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"{'P5' if c == 1 else 'P6'}\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pnm(path):
    with open(path, "rb") as f:
        raw = f.read()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while not raw[end : end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    magic, w, h = fields[0], int(fields[1]), int(fields[2])
    c = 1 if magic == b"P5" else 3
    data = np.frombuffer(raw[pos + 1 :], dtype=np.uint8).reshape(h, w, c)
    return data.astype(np.float32) / 255.0


def slot_grid(panels, recon):
    """Rows are panels; columns are original, composite, then each slot's masked render.

    Slot columns show ``mask * slot_render + (1 - mask) * white``.
    """
    image = recon.image.data
    masks = recon.masks.data
    slots = recon.slot_recons.data
    rows = []
    for p in range(panels.shape[0]):
        cols = [panels[p], image[p]]
        cols += [masks[p, s] * slots[p, s] + (1.0 - masks[p, s]) for s in range(slots.shape[1])]
        rows.append(np.concatenate(cols, axis=1))
    return np.concatenate(rows, axis=0)


def _write_csv(path, rows, columns):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def emit_report(log, model, problems, out_dir, max_panels=16):
    """Write the report for ``model`` and a few sample ``problems`` into ``out_dir``.

    Returns a summary dict (also written as ``summary.txt``).
    """
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "steps.csv"), log.steps, ["step", "recon", "task", "total", "lr"])
    _write_csv(os.path.join(out_dir, "epochs.csv"), log.epochs, ["epoch", "train_acc", "val_acc", "seconds"])
    model.eval()
    segs = []
    for i, problem in enumerate(problems):
        panels = problem.images[:max_panels]
        with no_grad():
            _, recon = model.recon_forward(panels)
        write_pnm(os.path.join(out_dir, f"slots_{i:03d}.{'pgm' if panels.shape[-1] == 1 else 'ppm'}"),
                  slot_grid(panels, recon))
        h, w = panels.shape[1:3]
        for p, sym in enumerate(problem.panels()[:max_panels]):
            segs.append(segment_panel(recon.masks.data[p, :, :, :, 0], object_masks(sym, h, w)))
    summary = {"steps": len(log.steps), "epochs": len(log.epochs), "lam": log.lam}
    if log.epochs:
        last = log.epochs[-1]
        summary.update(final_train_acc=last["train_acc"], final_val_acc=last["val_acc"])
    if log.steps:
        summary.update(final_recon=log.steps[-1]["recon"], final_task=log.steps[-1]["task"])
    for name, acc in sorted(log.test.get("per_type", {}).items()):
        summary[f"test_{name}"] = acc
    if "overall" in log.test:
        summary["test_overall"] = log.test["overall"]
    if segs:
        summary.update({f"seg_{k}": v for k, v in summarize(segs).items()})
    width = max(len(k) for k in summary)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as f:
        for k, v in summary.items():
            f.write(f"{k:<{width}}  {v:.6g}\n" if isinstance(v, float) else f"{k:<{width}}  {v}\n")
    return summary
