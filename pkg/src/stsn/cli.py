"""Command-line entry point: ``stsn <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .config import ABLATIONS, PRESETS, TrainConfig, load_config, preset

# flags that map one-to-one onto TrainConfig fields
_CONFIG_FLAGS = {
    "seed": int,
    "epochs": int,
    "batch_size": int,
    "micro_batch": int,
    "lr": float,
    "warmup_steps": int,
    "lam": float,
    "K": int,
    "L": int,
    "image_size": int,
    "dropout": float,
    "target_train_acc": float,
    "time_budget": float,
}


def _add_config_args(p):
    p.add_argument("--config", help="config file (JSON or key=value lines)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config field")
    for name, kind in _CONFIG_FLAGS.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None)


def _resolve_config(args):
    base = preset(args.preset) if args.preset else TrainConfig()
    overrides = {name: getattr(args, name) for name in _CONFIG_FLAGS}
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return load_config(args.config, overrides, base)


def _load(path):
    from .matrixgen.io import read_dataset

    return read_dataset(path) if path else []


def _progress(quiet):
    if quiet:
        return None

    def report(epoch, log):
        e = log.epochs[-1]
        s = log.steps[-1] if log.steps else {}
        print(
            f"epoch {epoch:4d}  loss {s.get('total', float('nan')):.4f}  "
            f"train_acc {e['train_acc']}  val_acc {e['val_acc']}  {e['seconds']:.1f}s",
            file=sys.stderr,
            flush=True,
        )

    return report


def _save_run(run, args):
    from .harness.checkpoint import save_checkpoint

    save_checkpoint(run.checkpoint, args.out)
    if args.log:
        run.log.save(args.log)


# ----------------------------------------------------------------------------
def cmd_generate(args):
    from .matrixgen.generate import generate_dataset, generate_splits
    from .matrixgen.io import write_dataset

    t0 = time.perf_counter()
    if args.splits is not None:
        splits = generate_splits(args.type, args.seed, args.splits, args.size, args.channels, args.workers)
        stem, ext = os.path.splitext(args.out)
        for name, problems in splits.items():
            write_dataset(problems, f"{stem}_{name}{ext or '.stsn'}")
        summary = {name: len(p) for name, p in splits.items()}
    else:
        problems = generate_dataset(args.type, args.n, args.seed, args.size, args.channels, workers=args.workers)
        write_dataset(problems, args.out)
        summary = {"problems": len(problems)}
    summary["seconds"] = round(time.perf_counter() - t0, 2)
    print(json.dumps(summary))


def cmd_train(args):
    from .harness.checkpoint import load_checkpoint
    from .harness.training import evaluate, replicas, train

    cfg = _resolve_config(args)
    train_set, val_set, test_set = _load(args.train), _load(args.val), _load(args.test)
    init = load_checkpoint(args.init, cfg) if args.init else None
    if args.replicas > 1:
        scored = test_set or val_set
        if not scored:
            raise SystemExit("--replicas needs --val or --test to compare runs")

        def one(c):
            return evaluate(train(c, train_set, val_set, init, args.dump_dir).model, scored).overall

        print(json.dumps(replicas(one, cfg, args.replicas)))
        return
    run = train(cfg, train_set, val_set, init, args.dump_dir, _progress(args.quiet))
    if test_set:
        run.log.test = evaluate(run.model, test_set).to_dict()
    _save_run(run, args)
    print(json.dumps({"epochs": len(run.log.epochs), "steps": len(run.log.steps), "test": run.log.test}))


def cmd_pretrain(args):
    from .harness.training import pretrain_reconstruction

    cfg = _resolve_config(args).replace(regime="recon_pretrain")
    run = pretrain_reconstruction(cfg, _load(args.data), args.dump_dir, _progress(args.quiet))
    _save_run(run, args)
    print(json.dumps({"steps": len(run.log.steps), "final_recon": run.log.steps[-1]["recon"]}))


def cmd_dual_train(args):
    from .harness.training import dual_train, evaluate

    cfg = _resolve_config(args).replace(regime="dual_train")
    run = dual_train(cfg, _load(args.train), _load(args.extra), _load(args.val), None, args.dump_dir,
                     _progress(args.quiet))
    if args.test:
        run.log.test = evaluate(run.model, _load(args.test)).to_dict()
    _save_run(run, args)
    print(json.dumps({"epochs": len(run.log.epochs), "test": run.log.test}))


def cmd_eval(args):
    from .harness.checkpoint import load_checkpoint
    from .harness.training import evaluate

    expected = _resolve_config(args) if (args.config or args.preset or args.set) else None
    ckpt = load_checkpoint(args.ckpt, expected)
    print(json.dumps(evaluate(ckpt, _load(args.data)).to_dict()))


def cmd_ablate(args):
    from .harness.training import ablate

    cfg = _resolve_config(args)
    results = ablate(cfg, args.flag, _load(args.train), _load(args.val), _load(args.test), _progress(args.quiet))
    summary = {}
    for name, res in results.items():
        summary[name] = res["eval"].to_dict() if res["eval"] else None
        if args.out_dir:
            os.makedirs(args.out_dir, exist_ok=True)
            res["log"].save(os.path.join(args.out_dir, f"{name}.metrics.json"))
    print(json.dumps(summary))


def cmd_gradcheck(args):
    from .gradcheck import micro_model_check

    t0 = time.perf_counter()
    report = micro_model_check(seed=args.seed, lam=args.lam, step=args.step, max_coords=args.coords)
    worst = max(report.values())
    out = {"max_relative_error": worst, "tensors": len(report), "seconds": round(time.perf_counter() - t0, 2)}
    if args.verbose:
        out["per_tensor"] = report
    print(json.dumps(out, indent=1 if args.verbose else None))
    return 0 if worst < args.tol else 1


def cmd_report(args):
    from .harness.checkpoint import load_checkpoint
    from .harness.metrics import MetricsLog
    from .harness.report import emit_report
    from .harness.training import model_from_checkpoint

    model = model_from_checkpoint(load_checkpoint(args.ckpt))
    log = MetricsLog.load(args.log) if args.log else MetricsLog(model.cfg.lam)
    problems = _load(args.data)[: args.n]
    summary = emit_report(log, model, problems, args.out_dir)
    print(json.dumps(summary))


# ----------------------------------------------------------------------------
def build_parser():
    parser = argparse.ArgumentParser(prog="stsn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a dataset of generated problems")
    p.add_argument("--type", choices=("logic", "location", "count", "all"), required=True)
    p.add_argument("--n", type=int, default=100, help="problems (per type for --type all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=80)
    p.add_argument("--channels", type=int, choices=(1, 3), default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--splits", type=float, default=None, metavar="SCALE",
                   help="write train/val/test files at SCALE x 16K/2K/2K instead of --n problems")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_generate)

    def run_parser(name, help_, func, data_args):
        p = sub.add_parser(name, help=help_)
        _add_config_args(p)
        for flag, required in data_args:
            p.add_argument(f"--{flag}", required=required)
        p.add_argument("--out", required=True, help="checkpoint path")
        p.add_argument("--log", help="metrics JSON path")
        p.add_argument("--dump-dir", default=None, help="where a divergence dump goes")
        p.add_argument("--quiet", action="store_true")
        p.set_defaults(func=func)
        return p

    p = run_parser("train", "train on a dataset", cmd_train, [("train", True), ("val", False), ("test", False)])
    p.add_argument("--init", help="checkpoint to initialize from (e.g. a reconstruction pretrain)")
    p.add_argument("--replicas", type=int, default=1, help="train N seeds and report max and mean accuracy")
    run_parser("pretrain-recon", "pretrain perception on reconstruction only", cmd_pretrain, [("data", True)])
    run_parser(
        "dual-train",
        "train with an extra reconstruction-only set",
        cmd_dual_train,
        [("train", True), ("extra", True), ("val", False), ("test", False)],
    )

    p = sub.add_parser("eval", help="accuracy of a checkpoint per problem type")
    _add_config_args(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train baseline plus one variant per flag")
    _add_config_args(p)
    p.add_argument("--flag", action="append", choices=ABLATIONS, required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--val")
    p.add_argument("--test")
    p.add_argument("--out-dir")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference check of the loss on a micro model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lam", type=float, default=1000.0)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--coords", type=int, default=6, help="coordinates sampled per tensor")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="CSV curves, slot grids and a summary for a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--log")
    p.add_argument("--n", type=int, default=4, help="sample problems to render")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args) or 0


if __name__ == "__main__":
    sys.exit(main())
