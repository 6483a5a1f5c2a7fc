"""Training, evaluation, checkpoints, and reports."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .metrics import MetricsLog
from .report import emit_report
from .segmentation import segment_panel, summarize
from .training import (
    EvalResult,
    RunResult,
    ablate,
    build_model,
    dual_train,
    evaluate,
    model_from_checkpoint,
    pretrain_reconstruction,
    replicas,
    train,
)

__all__ = [
    "Checkpoint",
    "EvalResult",
    "MetricsLog",
    "RunResult",
    "ablate",
    "build_model",
    "dual_train",
    "emit_report",
    "evaluate",
    "load_checkpoint",
    "model_from_checkpoint",
    "pretrain_reconstruction",
    "replicas",
    "save_checkpoint",
    "segment_panel",
    "summarize",
    "train",
]
