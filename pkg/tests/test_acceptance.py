"""Acceptance criteria 1-9, one PASS/FAIL line each.

Criteria 6b, 7 and 8 need three desk-scale training runs over 4000
problems. They run only with STSN_FULL_ACCEPTANCE=1; otherwise the test
times a real training step, projects the run time, and fails with the
projection.
"""

import functools
import os
import time

import numpy as np
import pytest

from conftest import tiny_config
from stsn.config import TrainConfig, preset
from stsn.decoder import composite
from stsn.gradcheck import micro_model_check
from stsn.harness import evaluate, train
from stsn.harness.checkpoint import decode_checkpoint, encode_checkpoint
from stsn.harness.segmentation import segment_panel, summarize
from stsn.matrixgen import (
    PROBLEM_TYPES,
    check_problem,
    generate_dataset,
    make_problem,
    mutable_attributes,
    problem_rng,
    solve,
)
from stsn.matrixgen.checker import majority_vote
from stsn.matrixgen.generate import generate_splits
from stsn.matrixgen.io import decode_dataset, encode_dataset
from stsn.matrixgen.raster import object_masks
from stsn.model import STSN
from stsn.reasoner import Reasoner, tcn
from stsn.slot_attention import SlotAttention
from stsn.tensor import Tensor, no_grad

VERDICTS = {}
FULL = os.environ.get("STSN_FULL_ACCEPTANCE") == "1"
BUDGET_HOURS = 12.0


def verdict(key, ok, detail):
    line = f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS[key] = line
    print(line)
    assert ok, line


def test_criterion_1_gradient_check():
    t0 = time.perf_counter()
    report = micro_model_check(seed=0, lam=1000.0, step=1e-6, max_coords=6)
    secs = time.perf_counter() - t0
    worst = max(report.values())
    name = max(report, key=report.get)
    verdict(
        "1",
        worst < 1e-3 and secs < 60,
        f"max rel err {worst:.2e} ({name}) over {len(report)} tensors in {secs:.1f}s",
    )


def test_criterion_2_normalization():
    worst_attn = worst_mask = 0.0
    for i in range(100):
        rng = np.random.default_rng([2, i])
        k, n = int(rng.integers(1, 10)), int(rng.integers(1, 65))
        d_in, d = int(rng.integers(2, 17)), int(rng.integers(2, 17))
        sa = SlotAttention(d_in, d, rng, iters=int(rng.integers(1, 4)))
        inputs = rng.standard_normal((2, n, d_in)) * rng.uniform(0.1, 10)
        attn = sa(inputs, k, rng).attn.data
        worst_attn = max(worst_attn, float(np.abs(attn.sum(axis=-2) - 1).max()))
        h = w = int(rng.integers(2, 12))
        logits = rng.standard_normal((k, h, w, 1)) * rng.uniform(0.1, 30)
        _, masks = composite(rng.random((k, h, w, 1)), logits)
        worst_mask = max(worst_mask, float(np.abs(masks.data.sum(axis=0) - 1).max()))
    verdict(
        "2",
        worst_attn <= 1e-6 and worst_mask <= 1e-6,
        f"max |sum-1|: attention {worst_attn:.1e}, masks {worst_mask:.1e} over 100 instances",
    )


def test_criterion_3_symmetry():
    rng = np.random.default_rng(3)
    r = Reasoner(32, rng, n_layers=2, n_heads=8, d_head=32, d_mlp=512)
    slot_err, cand_exact, comp_err = 0.0, True, 0.0
    for trial in range(10):
        ctx, cands = rng.standard_normal((1, 8, 9, 32)), rng.standard_normal((1, 8, 9, 32))
        base = r.score(ctx, cands).data[0]
        ctx2, cands2 = ctx.copy(), cands.copy()
        for p in range(8):
            ctx2[0, p] = ctx[0, p][rng.permutation(9)]
            cands2[0, p] = cands[0, p][rng.permutation(9)]
        slot_err = max(slot_err, float(np.abs(r.score(ctx2, cands2).data[0] - base).max()))
        perm = rng.permutation(8)
        cand_exact &= bool(np.array_equal(r.score(ctx, cands[:, perm]).data[0], base[perm]))

    model = STSN(tiny_config(K=5)).eval()
    with no_grad():
        slots = model.encode(rng.random((4, 48, 48, 1)), np.random.default_rng(0))
        image = model.reconstruct(slots).image.data
        for trial in range(4):
            perm = rng.permutation(5)
            slots.slots = Tensor(slots.slots.data[:, perm])
            comp_err = max(comp_err, float(np.abs(model.reconstruct(slots).image.data - image).max()))
    verdict(
        "3",
        slot_err <= 1e-4 and cand_exact and comp_err <= 1e-6,
        f"slot-perm score diff {slot_err:.1e}; candidate perm exact={cand_exact}; composite diff {comp_err:.1e}",
    )


def test_criterion_4_tcn():
    worst_mean = worst_var = 0.0
    for i in range(100):
        rng = np.random.default_rng([4, i])
        k, d = int(rng.integers(1, 17)), int(rng.integers(1, 65))
        seq = rng.normal(rng.uniform(-10, 10, d), rng.uniform(0.5, 5, d), size=(9 * k, d))
        out = tcn(seq, np.ones(d), np.zeros(d)).data.astype(np.float64)
        worst_mean = max(worst_mean, float(np.abs(out.mean(axis=0)).max()))
        worst_var = max(worst_var, float(np.abs(out.var(axis=0) - 1).max()))
    verdict(
        "4",
        worst_mean <= 1e-5 and worst_var <= 1e-3,
        f"max |mean| {worst_mean:.1e}, max |var-1| {worst_var:.1e} over 100 sequences (float32)",
    )


def feature(panel, attr):
    if attr == "location":
        return panel.locations
    if attr == "count":
        return panel.count
    return panel.uniform(attr)


def test_criterion_5_generator():
    n = 2000
    sd = np.sqrt(0.125 * 0.875 / n)
    lines, ok = [], True
    for ptype in PROBLEM_TYPES:
        checked = split_ok = unique_ok = 0
        hits = 0
        vote_rng = np.random.default_rng([5, len(ptype)])
        for i in range(n):
            p = make_problem(ptype, problem_rng(55, ptype, i))
            try:
                checked += bool(check_problem(p))
            except AssertionError:
                pass
            unique_ok += solve(p) == [p.answer_index] and [c == p.solution for c in p.candidates].count(True) == 1
            tallies = [sum(feature(c, a) == feature(p.solution, a) for c in p.candidates) for a in mutable_attributes(p)]
            split_ok += sorted(t for t in tallies if t != 8) == [4, 4, 4]
            hits += majority_vote(p.candidates, vote_rng) == p.answer_index
        acc = hits / n
        z = (acc - 0.125) / sd
        ok &= checked == split_ok == unique_ok == n and abs(z) <= 3
        lines.append(f"{ptype}: checker {checked}/{n} split {split_ok}/{n} unique {unique_ok}/{n} vote {acc:.4f} (z {z:+.2f})")
    verdict("5", ok, "; ".join(lines))


OVERFIT = dict(
    image_size=48,
    K=3,
    D_slot=16,
    T=2,
    enc_channels=8,
    dec_channels=8,
    dec_layers=1,
    L=1,
    H=2,
    D_head=8,
    D_MLP=32,
    dropout=0.0,
    augment=False,
    lr=2e-3,
    batch_size=4,
    micro_batch=4,
    warmup_steps=16,
    epochs=500,
    target_train_acc=0.99,
    time_budget=30 * 60.0,
)


@pytest.mark.slow
def test_criterion_6a_overfit():
    cfg = TrainConfig(**OVERFIT)
    problems = generate_dataset("all", 22, seed=606, size=48)[:64]
    t0 = time.perf_counter()
    run = train(cfg, problems)
    secs = time.perf_counter() - t0
    acc = evaluate(run.model, problems).overall
    verdict(
        "6a",
        acc >= 0.99 and len(run.log.epochs) <= 500 and secs < 30 * 60,
        f"train acc {acc:.3f} after {len(run.log.epochs)} epochs in {secs / 60:.1f} min (64 problems, 48x48)",
    )


# ---------------------------------------------------------------------------
# criteria 6b, 7, 8: desk-scale Location study


def desk_config(**kw):
    return preset("desk", time_budget=BUDGET_HOURS * 3600 / 3, **kw)


def step_seconds(cfg, problems, reps=2):
    """Wall time of one optimizer step on a single problem, forward and backward."""
    model = STSN(cfg).train()
    imgs = np.stack([problems[0].images])
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        out = model(imgs, np.array([problems[0].answer_index]), np.random.default_rng(0))
        out.loss.backward()
        times.append(time.perf_counter() - t0)
    return min(times)


@functools.lru_cache(maxsize=None)
def projection():
    probe = generate_dataset("location", 1, seed=0, size=48)
    t = step_seconds(desk_config(), probe)
    epoch_h = 4000 * t / 3600
    return t, epoch_h


def test_recon_error_direction_helper():
    # the reconstruction error used by criterion 7 is the model's own recon loss in eval mode
    cfg = tiny_config()
    model = STSN(cfg).eval()
    probs = generate_dataset("count", 1, seed=0, size=48)
    assert recon_error(model, probs) == pytest.approx(model(np.stack([probs[0].images])).recon_loss.item(), rel=1e-5)


def recon_error(model, problems):
    model.eval()
    errs = []
    with no_grad():
        for p in problems:
            loss, _ = model.recon_forward(p.images)
            errs.append(loss.item())
    return float(np.mean(errs))


def segmentation(model, problems):
    model.eval()
    segs = []
    with no_grad():
        for p in problems:
            _, recon = model.recon_forward(p.images)
            for i, sym in enumerate(p.panels()):
                segs.append(segment_panel(recon.masks.data[i, :, :, :, 0], object_masks(sym, 48, 48)))
    return summarize(segs)


_STUDY = {}


def location_study():
    if not _STUDY:
        splits = generate_splits("location", seed=2024, scale=0.25, size=48)
        train_set, val_set, test_set = splits["train"], splits["val"], splits["test"]
        for name, cfg in (
            ("stsn", desk_config()),
            ("no_slot_attention", desk_config(ablations=("no_slot_attention",))),
            ("lam1", desk_config(lam=1.0)),
        ):
            run = train(cfg, train_set, val_set)
            _STUDY[name] = {
                "acc": evaluate(run.model, test_set).overall,
                "recon": recon_error(run.model, test_set),
                "model": run.model,
                "epochs": len(run.log.epochs),
            }
        _STUDY["test_set"] = test_set
    return _STUDY


def not_run(key, what, runs):
    t, epoch_h = projection()
    epochs = preset("desk").epochs
    verdict(
        key,
        False,
        f"NOT RUN: {what}; measured {t:.1f}s per problem step (K=9 D=32 L=2, 48x48, this CPU), "
        f"so {runs} run(s) take {runs * epoch_h:.1f} h per epoch over 4000 problems and "
        f"{runs * epoch_h * epochs:.0f} h for the {epochs}-epoch desk schedule, against a {BUDGET_HOURS:.0f} h budget "
        "(STSN_FULL_ACCEPTANCE=1 runs it anyway)",
    )


@pytest.mark.slow
def test_criterion_6b_slot_attention_ablation():
    if not FULL:
        not_run("6b", "STSN and no_slot_attention runs on 4000 Location problems", 2)
    s = location_study()
    a, b = s["stsn"]["acc"], s["no_slot_attention"]["acc"]
    verdict("6b", a >= 0.85 and b <= 0.60, f"held-out acc STSN {a:.3f} vs no_slot_attention {b:.3f}")


@pytest.mark.slow
def test_criterion_7_lambda_direction():
    if not FULL:
        not_run("7", "desk-scale runs at lam 1 and lam 1000", 2)
    s = location_study()
    hi, lo = s["stsn"], s["lam1"]
    verdict(
        "7",
        hi["acc"] > lo["acc"] and hi["recon"] < lo["recon"],
        f"lam=1000 acc {hi['acc']:.3f} recon {hi['recon']:.4f}; lam=1 acc {lo['acc']:.3f} recon {lo['recon']:.4f}",
    )


@pytest.mark.slow
def test_criterion_8_segmentation():
    if not FULL:
        not_run("8", "needs the trained criterion 6b model", 1)
    s = location_study()
    seg = segmentation(s["stsn"]["model"], s["test_set"][:50])
    verdict(
        "8",
        seg["mean_iou"] >= 0.6 and seg["unused_mass_mean"] < 0.05,
        f"mean IoU {seg['mean_iou']:.3f}; unused slot mass mean {seg['unused_mass_mean']:.3f} "
        f"max {seg['unused_mass_max']:.3f}",
    )


def test_criterion_9_determinism_and_persistence(tmp_path):
    problems = generate_dataset("all", 2, seed=9, size=48)
    cfg = tiny_config(epochs=2, micro_batch=2)
    a, b = train(cfg, problems[:4], problems[4:]), train(cfg, problems[:4], problems[4:])
    same_metrics = a.log.fingerprint() == b.log.fingerprint()
    same_params = all(np.array_equal(a.checkpoint.params[k], b.checkpoint.params[k]) for k in a.checkpoint.params)

    buf = encode_dataset(problems)
    (tmp_path / "d.stsn").write_bytes(buf)
    data_ok = encode_dataset(decode_dataset((tmp_path / "d.stsn").read_bytes())) == buf

    cbuf = encode_checkpoint(a.checkpoint)
    back = decode_checkpoint(cbuf)
    ckpt_ok = encode_checkpoint(back) == cbuf and all(
        np.array_equal(back.params[k], v) for k, v in a.checkpoint.params.items()
    )
    verdict(
        "9",
        same_metrics and same_params and data_ok and ckpt_ok,
        f"metrics identical={same_metrics} params identical={same_params} "
        f"dataset round trip={data_ok} checkpoint round trip={ckpt_ok}",
    )
