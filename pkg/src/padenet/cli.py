"""Command-line surface tying the pipeline, model, training, and metrics
together into reproducible experiments.

Subcommands: synth (write a synthetic CSV corpus), train (all seeds of one
config), eval (score a shard with a checkpoint), params (trainable-parameter
count), gradcheck (finite-difference verification), report (re-aggregate an
existing run directory). Config files are JSON; flags override file values;
the resolved config is snapshotted beside the outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import figures, metrics as metrics_mod
from .errors import ConfigError
from .model import ModelConfig, build_model, count_params, load_checkpoint, save_checkpoint
from .numerics import RngStream
from .pipeline import CHANNELS, SegmentSet, load_csv_corpus
from .synth import build_synthetic_corpus, write_corpus_csv
from .training import (
    STREAM_INIT,
    TrainingConfig,
    evaluate,
    history_csv,
    run_seed,
)

ENV_OUTPUT_ROOT = "PADENET_OUTPUT_ROOT"

DEFAULT_CONFIG = {
    "model": {
        "p": 1,
        "q": 0,
        "activation": "tanh",
        "filters": 32,
        "kernel": 7,
        "blocks": 7,
        "dense_units": 64,
        "dropout": 0.25,
        "l2_lambda": 1e-4,
    },
    "training": {
        "lr": 5e-4,
        "batch": 64,
        "epochs": 100,
        "early_stop_patience": 20,
        "lr_patience": 10,
        "lr_factor": 0.5,
        "seeds": [0, 1, 2, 3, 4],
        "adam_beta1": 0.9,
        "adam_beta2": 0.999,
        "adam_epsilon": 1e-7,
        "precision": "float64",
    },
    "data": {
        "source": "synthetic",
        "path": None,
        "channel": "accel1",
        "window": 1000,
        "split": [0.8, 0.1, 0.1],
        "synthetic_duration": 2.0,
        "synthetic_snr_db": 20.0,
        "synthetic_seed": 0,
        "speeds": [1, 2, 3, 4],
        "loads": [0, 1],
    },
    "output": {
        "report_dir": None,
        "checkpoint_dir": None,
    },
}


def _deep_update(base: dict, override: dict) -> dict:
    out = {k: (v.copy() if isinstance(v, dict) else v) for k, v in base.items()}
    for key, value in override.items():
        if key not in out:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config block {key!r} must be an object")
            for sub, v in value.items():
                if sub not in out[key]:
                    raise ConfigError(f"unknown config key {key}.{sub}")
                out[key][sub] = v
        else:
            out[key] = value
    return out


def resolve_config(config_path: str | None, overrides: dict) -> dict:
    resolved = {k: v.copy() for k, v in DEFAULT_CONFIG.items()}
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            resolved = _deep_update(resolved, json.load(fh))
    return _deep_update(resolved, overrides)


def config_hash(resolved: dict) -> str:
    text = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def make_model_config(resolved: dict) -> ModelConfig:
    m = resolved["model"]
    return ModelConfig(
        p=int(m["p"]),
        q=int(m["q"]),
        activation=str(m["activation"]),
        filters=int(m["filters"]),
        kernel=int(m["kernel"]),
        blocks=int(m["blocks"]),
        dense_units=int(m["dense_units"]),
        dropout=float(m["dropout"]),
        l2_lambda=float(m["l2_lambda"]),
        input_length=int(resolved["data"]["window"]),
        input_channels=1,
    )


def make_training_config(resolved: dict) -> TrainingConfig:
    t = resolved["training"]
    return TrainingConfig(
        lr=float(t["lr"]),
        batch=int(t["batch"]),
        max_epochs=int(t["epochs"]),
        early_stop_patience=int(t["early_stop_patience"]),
        lr_patience=int(t["lr_patience"]),
        lr_factor=float(t["lr_factor"]),
        seeds=tuple(int(s) for s in t["seeds"]),
        adam_beta1=float(t["adam_beta1"]),
        adam_beta2=float(t["adam_beta2"]),
        adam_epsilon=float(t["adam_epsilon"]),
        precision=str(t["precision"]),
    )


def validate_resolved(resolved: dict) -> list[str]:
    errs = make_model_config(resolved).validate()
    errs += make_training_config(resolved).validate()
    d = resolved["data"]
    if d["source"] not in ("synthetic", "real-csv-dir"):
        errs.append(f"data.source must be 'synthetic' or 'real-csv-dir', got {d['source']!r}")
    if d["source"] == "real-csv-dir" and not d["path"]:
        errs.append("data.path is required when data.source is 'real-csv-dir'")
    if d["channel"] not in CHANNELS:
        errs.append(f"data.channel must be one of {CHANNELS}, got {d['channel']!r}")
    split = d["split"]
    if len(split) != 3 or any(r <= 0 for r in split) or abs(sum(split) - 1.0) > 1e-9:
        errs.append(f"data.split must be three positive ratios summing to 1, got {split}")
    if d["source"] == "synthetic":
        if float(d["synthetic_duration"]) * 42000 < int(d["window"]) * 10:
            errs.append("data.synthetic_duration too short for a 10-window split")
        if not set(d["speeds"]) <= {1, 2, 3, 4}:
            errs.append(f"data.speeds must be a subset of [1, 2, 3, 4], got {d['speeds']}")
        if not set(d["loads"]) <= {0, 1}:
            errs.append(f"data.loads must be a subset of [0, 1], got {d['loads']}")
    return errs


def build_data(resolved: dict):
    d = resolved["data"]
    if d["source"] == "real-csv-dir":
        return load_csv_corpus(
            d["path"], d["channel"], window=int(d["window"]), ratios=tuple(d["split"])
        )
    return build_synthetic_corpus(
        channel=d["channel"],
        duration=float(d["synthetic_duration"]),
        snr_db=float(d["synthetic_snr_db"]),
        seed=int(d["synthetic_seed"]),
        speeds=tuple(d["speeds"]),
        loads=tuple(d["loads"]),
        window=int(d["window"]),
        ratios=tuple(d["split"]),
    )


def output_root(resolved: dict) -> Path:
    root = resolved["output"]["report_dir"] or os.environ.get(ENV_OUTPUT_ROOT) or "runs"
    return Path(root)


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    overrides = _collect_overrides(args)
    resolved = resolve_config(args.config, overrides)
    errs = validate_resolved(resolved)
    if errs:
        for e in errs:
            print(f"config error: {e}", file=sys.stderr)
        return 2

    model_cfg = make_model_config(resolved)
    train_cfg = make_training_config(resolved)
    run_dir = output_root(resolved) / config_hash(resolved)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")

    print(f"run directory: {run_dir}")
    print("building data ...", flush=True)
    data = build_data(resolved)
    print(
        f"data: train={len(data.train)} val={len(data.val)} test={len(data.test)} windows",
        flush=True,
    )
    if args.save_shards != "none":
        data.test.save(run_dir / "test.shard")
        if args.save_shards == "all":
            data.train.save(run_dir / "train.shard")
            data.val.save(run_dir / "val.shard")

    ckpt_root = resolved["output"]["checkpoint_dir"]
    per_seed = []
    total = np.zeros((model_cfg.classes, model_cfg.classes), dtype=np.int64)
    for seed in train_cfg.seeds:
        seed_dir = run_dir / f"seed-{seed}"
        seed_dir.mkdir(exist_ok=True)
        model, res = run_seed(model_cfg, data, train_cfg, seed)
        ckpt_dir = Path(ckpt_root) / run_dir.name / f"seed-{seed}" if ckpt_root else seed_dir
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, ckpt_dir / "checkpoint.bin")
        (seed_dir / "history.csv").write_text(history_csv(res.history))
        (seed_dir / "confusion.csv").write_text(metrics_mod.confusion_csv(res.confusion))
        (seed_dir / "metrics.json").write_text(
            json.dumps(
                {
                    "seed": seed,
                    "metrics": res.metrics,
                    "test_loss": res.test_loss,
                    "best_epoch": res.best_epoch,
                    "epochs_run": len(res.history),
                },
                indent=2,
            )
            + "\n"
        )
        figures.plot_history(res.history, seed_dir / "history.png", title=f"seed {seed}")
        figures.plot_confusion(
            res.confusion, seed_dir / "confusion.png", title=f"Test confusion, seed {seed}"
        )
        per_seed.append(res)
        total += res.confusion
        print(
            f"seed {seed}: test acc {res.metrics['accuracy']:.2f}% "
            f"(best epoch {res.best_epoch}, {len(res.history)} epochs)",
            flush=True,
        )

    summary = metrics_mod.aggregate_runs([r.metrics for r in per_seed])
    _write_aggregates(run_dir, resolved, summary, total, len(per_seed))
    print(f"mean accuracy: {metrics_mod.format_mean_std(summary.accuracy)} %")
    return 0


def _write_aggregates(run_dir: Path, resolved, summary, total_cm, n_runs: int) -> None:
    m = resolved["model"]
    title = (
        f"P={m['p']}, Q={m['q']} ({m['activation']}) on "
        f"{resolved['data']['channel']} [{resolved['data']['source']}]"
    )
    (run_dir / "report.md").write_text(metrics_mod.report_markdown(summary, title, n_runs))
    (run_dir / "report.csv").write_text(metrics_mod.report_csv(summary))
    (run_dir / "confusion.csv").write_text(metrics_mod.confusion_csv(total_cm))
    figures.plot_confusion(
        total_cm, run_dir / "confusion.png", title=f"Aggregated confusion over {n_runs} run(s)"
    )


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    config_path = run_dir / "config.json"
    if not config_path.exists():
        print(f"error: no config.json under {run_dir}", file=sys.stderr)
        return 1
    resolved = json.loads(config_path.read_text())
    seed_dirs = sorted(run_dir.glob("seed-*"))
    per_run = []
    total = None
    for sd in seed_dirs:
        metrics_file = sd / "metrics.json"
        confusion_file = sd / "confusion.csv"
        if not metrics_file.exists() or not confusion_file.exists():
            continue
        info = json.loads(metrics_file.read_text())
        per_run.append(info["metrics"])
        cm = metrics_mod.parse_confusion_csv(confusion_file.read_text())
        total = cm if total is None else total + cm
    if not per_run:
        print(f"error: no completed seed outputs under {run_dir}", file=sys.stderr)
        return 1
    summary = metrics_mod.aggregate_runs(per_run)
    _write_aggregates(run_dir, resolved, summary, total, len(per_run))
    print(f"re-aggregated {len(per_run)} run(s) into {run_dir}")
    print(f"mean accuracy: {metrics_mod.format_mean_std(summary.accuracy)} %")
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    shard = SegmentSet.load(args.shard)
    loss, acc, pred = evaluate(model, shard)
    cm = metrics_mod.confusion(shard.labels, pred, model.config.classes)
    vals = {k: 100.0 * v for k, v in metrics_mod.metrics_from_confusion(cm).items()}
    print(f"samples: {len(shard)}")
    print(f"loss: {loss!r}")
    for name in metrics_mod.METRIC_NAMES:
        print(f"{name}: {vals[name]:.4f}%")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(
            json.dumps({"metrics": vals, "loss": loss, "samples": len(shard)}, indent=2) + "\n"
        )
        (out / "confusion.csv").write_text(metrics_mod.confusion_csv(cm))
        figures.plot_confusion(cm, out / "confusion.png", title="Evaluation confusion")
    return 0


def cmd_params(args) -> int:
    cfg = ModelConfig(
        p=args.p,
        q=args.q,
        activation=args.activation,
        filters=args.filters,
        kernel=args.kernel,
        blocks=args.blocks,
        dense_units=args.dense_units,
    )
    errs = cfg.validate()
    if errs:
        for e in errs:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    model = build_model(cfg, RngStream(0))
    print(count_params(model))
    return 0


def cmd_gradcheck(args) -> int:
    from .verification import network_grad_check

    err = network_grad_check(p=args.p, q=args.q, activation=args.activation, n_seeds=args.seeds)
    print(f"max relative gradient error: {err:.3e}")
    if err <= args.threshold:
        return 0
    print(f"error: exceeds threshold {args.threshold:.1e}", file=sys.stderr)
    return 1


def cmd_synth(args) -> int:
    written = write_corpus_csv(
        args.out,
        duration=args.duration,
        snr_db=args.snr,
        seed=args.seed,
        speeds=tuple(int(s) for s in args.speeds.split(",")),
        loads=tuple(int(l) for l in args.loads.split(",")),
    )
    print(f"wrote {len(written)} recordings under {args.out}")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing

_OVERRIDE_MAP = {
    "p": ("model", "p", int),
    "q": ("model", "q", int),
    "activation": ("model", "activation", str),
    "filters": ("model", "filters", int),
    "kernel": ("model", "kernel", int),
    "blocks": ("model", "blocks", int),
    "epochs": ("training", "epochs", int),
    "lr": ("training", "lr", float),
    "batch": ("training", "batch", int),
    "precision": ("training", "precision", str),
    "source": ("data", "source", str),
    "path": ("data", "path", str),
    "channel": ("data", "channel", str),
    "duration": ("data", "synthetic_duration", float),
    "snr": ("data", "synthetic_snr_db", float),
    "data_seed": ("data", "synthetic_seed", int),
    "out": ("output", "report_dir", str),
}


def _collect_overrides(args) -> dict:
    overrides: dict = {}
    for flag, (block, key, _) in _OVERRIDE_MAP.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides.setdefault(block, {})[key] = value
    if getattr(args, "seeds", None):
        overrides.setdefault("training", {})["seeds"] = [
            int(s) for s in str(args.seeds).split(",")
        ]
    if getattr(args, "speeds", None):
        overrides.setdefault("data", {})["speeds"] = [
            int(s) for s in str(args.speeds).split(",")
        ]
    if getattr(args, "loads", None):
        overrides.setdefault("data", {})["loads"] = [int(s) for s in str(args.loads).split(",")]
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="padenet",
        description="Rational-kernel 1D networks for motor fault diagnosis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train all seeds of one experiment config")
    p_train.add_argument("--config", help="JSON experiment config; flags override its values")
    for flag, (_, _, typ) in _OVERRIDE_MAP.items():
        p_train.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=typ)
    p_train.add_argument("--seeds", help="comma-separated seed list")
    p_train.add_argument("--speeds", help="comma-separated synthetic speed settings (1..4)")
    p_train.add_argument("--loads", help="comma-separated synthetic load flags (0,1)")
    p_train.add_argument(
        "--save-shards",
        choices=("none", "test", "all"),
        default="test",
        help="which data partitions to save beside the run outputs",
    )
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a data shard with a saved checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--shard", required=True)
    p_eval.add_argument("--out", help="optional directory for metrics/confusion outputs")
    p_eval.set_defaults(func=cmd_eval)

    p_params = sub.add_parser("params", help="print the trainable-parameter count of a config")
    p_params.add_argument("--p", type=int, required=True)
    p_params.add_argument("--q", type=int, required=True)
    p_params.add_argument("--activation", default="tanh")
    p_params.add_argument("--filters", type=int, default=32)
    p_params.add_argument("--kernel", type=int, default=7)
    p_params.add_argument("--blocks", type=int, default=7)
    p_params.add_argument("--dense-units", dest="dense_units", type=int, default=64)
    p_params.set_defaults(func=cmd_params)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p_grad.add_argument("--p", type=int, default=2)
    p_grad.add_argument("--q", type=int, default=1)
    p_grad.add_argument("--activation", default="tanh")
    p_grad.add_argument("--seeds", type=int, default=5, help="number of random draws")
    p_grad.add_argument("--threshold", type=float, default=1e-5)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_synth = sub.add_parser("synth", help="write a synthetic CSV corpus")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--duration", type=float, default=2.0, help="seconds per recording")
    p_synth.add_argument("--snr", type=float, default=20.0, help="SNR in dB")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--speeds", default="1,2,3,4")
    p_synth.add_argument("--loads", default="0,1")
    p_synth.set_defaults(func=cmd_synth)

    p_report = sub.add_parser("report", help="re-aggregate an existing run directory")
    p_report.add_argument("--run", required=True)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # one-line diagnostic, nonzero exit
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
