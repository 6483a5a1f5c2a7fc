"""Training metrics: per-step losses, per-epoch accuracies, per-type test accuracy."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field


@dataclass
class MetricsLog:
    lam: float
    steps: list = field(default_factory=list)  # {"step", "recon", "task", "total", "lr"}
    epochs: list = field(default_factory=list)  # {"epoch", "train_acc", "val_acc", "seconds"}
    test: dict = field(default_factory=dict)  # problem type -> accuracy, plus "overall"

    def log_step(self, step, recon, task, total, lr):
        self.steps.append({"step": step, "recon": recon, "task": task, "total": total, "lr": lr})

    def log_epoch(self, epoch, train_acc, val_acc, seconds):
        self.epochs.append({"epoch": epoch, "train_acc": train_acc, "val_acc": val_acc, "seconds": seconds})

    def loss_identity_error(self):
        """Largest |total - (lam * recon + task)| relative to max(1, |total|) over logged steps."""
        worst = 0.0
        for s in self.steps:
            err = abs(s["total"] - (self.lam * s["recon"] + s["task"])) / max(1.0, abs(s["total"]))
            worst = max(worst, err)
        return worst

    def fingerprint(self):
        """JSON of everything except wall-clock timings; equal across fixed-seed reruns."""
        d = asdict(self)
        d["epochs"] = [{k: v for k, v in e.items() if k != "seconds"} for e in d["epochs"]]
        return json.dumps(d, sort_keys=True)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_json(f.read())
