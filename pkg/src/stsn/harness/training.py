"""Training regimes, evaluation, and the ablation runner."""

from __future__ import annotations

import copy
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, TrainingDiverged
from ..matrixgen.augment import augment as augment_images
from ..matrixgen.symbolic import PROBLEM_TYPES
from ..model import STSN
from ..optim import Adam, warmup_lr
from ..reasoner import total_loss
from ..tensor import no_grad
from .checkpoint import Checkpoint
from .metrics import MetricsLog

# independent random streams per purpose, all derived from the config seed
_ORDER, _AUGMENT, _SAMPLE, _EXTRA = 1, 2, 3, 4


def _stream(seed, purpose):
    return np.random.default_rng([int(seed), purpose])


@dataclass
class RunResult:
    checkpoint: Checkpoint
    log: MetricsLog
    model: STSN


@dataclass
class EvalResult:
    overall: float
    per_type: dict  # type -> accuracy
    counts: dict  # type -> number of problems
    predictions: list = field(default_factory=list)

    def to_dict(self):
        return {"overall": self.overall, "per_type": self.per_type, "counts": self.counts}


def build_model(cfg, init=None):
    """Fresh model for ``cfg``; parameters present in ``init`` overwrite the fresh ones."""
    model = STSN(cfg, np.random.default_rng(cfg.seed))
    if init is not None:
        init.check_compatible(cfg)
        model.load_state_dict(init.params, strict=False)
    return model


def model_from_checkpoint(ckpt):
    model = STSN(ckpt.config, np.random.default_rng(ckpt.config.seed))
    model.load_state_dict(ckpt.params, strict=True)
    return model.eval()


def _group_images(item):
    images = item.images if hasattr(item, "images") else np.asarray(item)
    if images is None:
        raise ContractError("problem has no rendered images")
    return images if images.ndim == 4 else images[..., None]


def _stack(items, idx, rng, augment):
    out = []
    for i in idx:
        images = _group_images(items[i])
        if augment:
            images, _ = augment_images(images, rng)
        out.append(images)
    return np.stack(out)


def _snapshot(model, opt, step):
    state = copy.deepcopy(opt.state)
    return model.state_dict(), state, step


def _dump(dump_dir, cfg, model, step, batch, values):
    os.makedirs(dump_dir, exist_ok=True)
    path = os.path.join(dump_dir, f"diverged_step{step}.npz")
    arrays = {f"param/{k}": v.data for k, v in model.named_parameters().items()}
    arrays["batch"] = np.asarray(batch)
    np.savez(path, **arrays)
    with open(path + ".json", "w", encoding="utf-8") as f:
        json.dump({"step": step, "config": cfg.to_dict(), "losses": values}, f, indent=1)
    return path


def _check(values, cfg, model, step, batch, dump_dir):
    if all(np.isfinite(v) for v in values.values()):
        return
    path = _dump(dump_dir or ".", cfg, model, step, batch, values)
    raise TrainingDiverged(f"non-finite loss at step {step}: {values}; dump at {path}", path)


def dual_train(cfg, task_set, extra_recon_set=None, val_set=None, init=None, dump_dir=None, progress=None):
    """Joint task + reconstruction training, with an optional reconstruction-only set.

    Each micro-batch of task problems is paired with an equal number of
    problems drawn cyclically from ``extra_recon_set``. The perception
    stack then minimizes ``lam * (r_task + r_extra) / 2 + task``; the
    reasoner only sees the task term. An empty extra set reduces this to
    plain training.
    """
    if not task_set:
        raise ContractError("empty training set")
    model = build_model(cfg, init)
    opt = Adam(model.named_parameters())
    order_rng, aug_rng = _stream(cfg.seed, _ORDER), _stream(cfg.seed, _AUGMENT)
    sample_rng, extra_rng = _stream(cfg.seed, _SAMPLE), _stream(cfg.seed, _EXTRA)
    extra = list(extra_recon_set or [])
    extra_queue = []
    augment = cfg.effective_augment
    log = MetricsLog(cfg.lam)
    n = len(task_set)
    step = 0
    best_val, best = None, None
    started = time.perf_counter()

    for epoch in range(cfg.epochs):
        model.train()
        t0 = time.perf_counter()
        correct = 0
        perm = order_rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            lr = warmup_lr(step, cfg.lr, cfg.warmup_steps)
            opt.zero_grad()
            sums = {"recon": 0.0, "task": 0.0, "total": 0.0}
            for mlo in range(0, len(idx), cfg.micro_batch):
                mi = idx[mlo : mlo + cfg.micro_batch]
                weight = len(mi) / len(idx)
                images = _stack(task_set, mi, aug_rng, augment)
                answers = np.array([task_set[i].answer_index for i in mi])
                out = model(images, answers, sample_rng)
                recon = out.recon_loss
                if extra:
                    if len(extra_queue) < len(mi):
                        extra_queue.extend(extra_rng.permutation(len(extra)).tolist())
                    ei, extra_queue = extra_queue[: len(mi)], extra_queue[len(mi) :]
                    # own stream, so adding the extra set leaves the task path unchanged
                    panels = _stack(extra, ei, extra_rng, augment)
                    r_extra, _ = model.recon_forward(panels.reshape((-1,) + panels.shape[2:]), extra_rng)
                    recon = (recon + r_extra) * 0.5
                loss = total_loss(recon, out.task_loss, cfg.lam)
                values = {"recon": recon.item(), "task": out.task_loss.item(), "total": loss.item()}
                _check(values, cfg, model, step, mi, dump_dir)
                (loss * weight).backward()
                for k, v in values.items():
                    sums[k] += weight * v
                correct += int((out.scores.data.argmax(axis=1) == answers).sum())
            opt.step(lr)
            step += 1
            log.log_step(step, sums["recon"], sums["task"], sums["total"], lr)
        train_acc = correct / n
        val_acc = evaluate(model, val_set).overall if val_set else None
        log.log_epoch(epoch, train_acc, val_acc, time.perf_counter() - t0)
        if progress:
            progress(epoch, log)
        if val_acc is not None and (best_val is None or val_acc > best_val):
            best_val, best = val_acc, _snapshot(model, opt, step)
        if cfg.target_train_acc is not None and train_acc >= cfg.target_train_acc:
            if evaluate(model, task_set).overall >= cfg.target_train_acc:
                break
        if cfg.time_budget is not None and time.perf_counter() - started >= cfg.time_budget:
            break

    final = _snapshot(model, opt, step)
    params, opt_state, at_step = best if best is not None else final
    if best is not None:
        model.load_state_dict(params)
    extra_info = {"regime": cfg.regime, "epochs_run": len(log.epochs), "best_val": best_val}
    ckpt = Checkpoint(cfg, params, at_step, opt_state, extra_info)
    return RunResult(ckpt, log, model.eval())


def train(cfg, train_set, val_set=None, init=None, dump_dir=None, progress=None):
    """Standard regime: ADAM with linear warmup on ``lam * recon + task``.

    With a validation set the returned checkpoint holds the parameters of
    the epoch with the best validation accuracy.
    """
    return dual_train(cfg, train_set, None, val_set, init, dump_dir, progress)


def pretrain_reconstruction(cfg, image_set, dump_dir=None, progress=None):
    """Optimize the reconstruction loss alone over encoder, slot attention, decoder.

    ``image_set`` holds problems or image groups; labels are never read.
    The returned checkpoint carries perception parameters only, so a later
    :func:`train` call with it as ``init`` starts the reasoner fresh.
    """
    if not image_set:
        raise ContractError("empty image set")
    model = build_model(cfg)
    opt = Adam(model.perception_parameters())
    order_rng, aug_rng, sample_rng = (_stream(cfg.seed, s) for s in (_ORDER, _AUGMENT, _SAMPLE))
    log = MetricsLog(1.0)  # single objective
    n = len(image_set)
    step = 0
    for epoch in range(cfg.epochs):
        model.train()
        t0 = time.perf_counter()
        perm = order_rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            lr = warmup_lr(step, cfg.lr, cfg.warmup_steps)
            opt.zero_grad()
            total = 0.0
            for mlo in range(0, len(idx), cfg.micro_batch):
                mi = idx[mlo : mlo + cfg.micro_batch]
                weight = len(mi) / len(idx)
                images = _stack(image_set, mi, aug_rng, cfg.effective_augment)
                loss, _ = model.recon_forward(images.reshape((-1,) + images.shape[2:]), sample_rng)
                values = {"recon": loss.item()}
                _check(values, cfg, model, step, mi, dump_dir)
                (loss * weight).backward()
                total += weight * values["recon"]
            opt.step(lr)
            step += 1
            log.log_step(step, total, 0.0, total, lr)
        log.log_epoch(epoch, None, None, time.perf_counter() - t0)
        if progress:
            progress(epoch, log)
    params = {k: v.data.copy() for k, v in model.perception_parameters().items()}
    ckpt = Checkpoint(cfg, params, step, None, {"regime": "recon_pretrain", "partial": True})
    return RunResult(ckpt, log, model.eval())


def score_problems(model, images):
    """Deterministic scores (B, 8) for image groups (B, 16, H, W, C)."""
    model.eval()
    with no_grad():
        return model(images).scores.data


def evaluate(scorer, dataset, config=None, batch_size=8):
    """Accuracy overall and per problem type.

    ``scorer`` is a :class:`Checkpoint`, an :class:`STSN`, or any callable
    mapping images (B, 16, H, W, C) to scores (B, 8). A checkpoint is
    checked against ``config`` when one is given.
    """
    if isinstance(scorer, Checkpoint):
        if config is not None:
            scorer.check_compatible(config)
        scorer = model_from_checkpoint(scorer)
    if isinstance(scorer, STSN):
        model = scorer
        was_training = model.training

        def scorer(images):
            return score_problems(model, images)

    else:
        was_training = None
    hits = {t: 0 for t in PROBLEM_TYPES}
    counts = {t: 0 for t in PROBLEM_TYPES}
    preds = []
    for lo in range(0, len(dataset), batch_size):
        chunk = dataset[lo : lo + batch_size]
        scores = np.asarray(scorer(np.stack([_group_images(p) for p in chunk])))
        for p, s in zip(chunk, scores):
            pred = int(np.argmax(s))
            preds.append(pred)
            counts[p.problem_type] += 1
            hits[p.problem_type] += int(pred == p.answer_index)
    if was_training:
        model.train()
    total = sum(counts.values())
    per_type = {t: hits[t] / counts[t] for t in PROBLEM_TYPES if counts[t]}
    return EvalResult(sum(hits.values()) / total if total else float("nan"), per_type, counts, preds)


def ablate(cfg, flags, train_set, val_set=None, test_set=None, progress=None):
    """Train the baseline and one variant per flag under the same budget and seed.

    Returns ``{variant: {"log": MetricsLog, "eval": EvalResult | None}}``.
    """
    out = {}
    for flag in (None, *flags):
        variant = cfg if flag is None else cfg.replace(ablations=list(cfg.ablations) + [flag])
        run = train(variant, train_set, val_set, progress=progress)
        result = evaluate(run.model, test_set) if test_set else None
        if result is not None:
            run.log.test = result.to_dict()
        out[flag or "baseline"] = {"log": run.log, "eval": result, "checkpoint": run.checkpoint}
    return out


def replicas(run_fn, cfg, n):
    """Run ``run_fn(cfg_i)`` for seeds ``cfg.seed .. cfg.seed + n - 1``.

    ``run_fn`` returns an accuracy; the summary reports each, the max, and the mean.
    """
    accs = [float(run_fn(cfg.replace(seed=cfg.seed + i))) for i in range(n)]
    return {"accuracies": accs, "max": max(accs), "mean": float(np.mean(accs))}

