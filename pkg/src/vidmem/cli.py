"""Command-line entry point: ``vidmem <command> [--config PATH] [--seed N] [--out DIR] [--set k=v ...]``.

Commands: gen-data, train, eval, summarize, grad-check, ablation, show-config.
Every command writes ``<out>/<command>.json`` and echoes it on stdout.
Exit status is 0 on success, 2 on a configuration error and 1 on any other failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import config as config_mod
from .checks import gradcheck_suite
from .dataio import generate_synthetic, load_dataset, load_manifest, split, write_dataset, write_manifest
from .errors import ConfigError, VidmemError
from .metrics import mean_summary_f1
from .pipeline import evaluate_multimodal
from .summarizer import mu_sweep, summarize, synthetic_corpus
from .tmccl import MotionEncoder, evaluate_motion, train_motion_encoder

logger = logging.getLogger("vidmem")

COMMANDS = ("gen-data", "train", "eval", "summarize", "grad-check", "ablation", "show-config")


# paths ---------------------------------------------------------------------------

def _out(cfg):
    path = Path(cfg["out"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dataset_path(cfg):
    return Path(cfg["dataset"]) if cfg["dataset"] else Path(cfg["out"]) / "dataset.jsonl"


def _model_path(cfg):
    return Path(cfg["model"]) if cfg["model"] else Path(cfg["out"]) / "motion_encoder.json"


def _manifest_dir(cfg):
    return Path(cfg["manifest_dir"]) if cfg["manifest_dir"] else Path(cfg["out"]) / "manifests"


def _splits(cfg):
    records = load_dataset(_dataset_path(cfg))
    return split(records, cfg["split"], cfg["seed"])


def _report(command, cfg, metrics, fusion_weights=None, loss_traces=None, **extra):
    doc = {
        "command": command,
        "seed": cfg["seed"],
        "config": cfg.to_json(),
        "metrics": metrics,
        "fusion_weights": fusion_weights,
        "loss_traces": loss_traces or {},
    }
    doc.update(extra)
    return doc


# commands ------------------------------------------------------------------------

def cmd_gen_data(cfg):
    synth = cfg.synthetic()
    records = generate_synthetic(synth)
    _out(cfg)
    path = _dataset_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(records, path)
    manifests, _ = synthetic_corpus(
        synth, cfg["num_videos"], cfg["clips_per_video"],
        memorability_share=cfg["memorability_share"], budget_fraction=cfg["budget_fraction"], seed=cfg["seed"],
    )
    mdir = _manifest_dir(cfg)
    mdir.mkdir(parents=True, exist_ok=True)
    for manifest in manifests:
        write_manifest(manifest, mdir / f"{manifest.video_id}.json")
    metrics = {
        "num_records": len(records),
        "num_manifests": len(manifests),
        "mean_st_score": float(np.mean([r.st_score for r in records])),
    }
    return _report("gen-data", cfg, metrics, dataset=str(path), manifests=str(mdir))


def cmd_train(cfg):
    train, val, _ = _splits(cfg)
    result = train_motion_encoder(train, cfg.train(), cfg["use_tmccl"], cfg.encoder())
    path = _model_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    result.encoder.save(path, result.config)
    metrics = {
        "val_st_rc": evaluate_motion(result.encoder, val),
        "final_loss": result.loss_trace[-1],
        "use_tmccl": bool(cfg["use_tmccl"]),
    }
    traces = {"loss": result.loss_trace, "mse": result.mse_trace, "contrastive": result.contrastive_trace}
    return _report("train", cfg, metrics, loss_traces=traces, model=str(path))


def cmd_eval(cfg):
    train, val, test = _splits(cfg)
    encoder = MotionEncoder.load(_model_path(cfg))
    heads = cfg.heads()
    st = evaluate_multimodal(train, val, test, encoder, heads, cfg["seed"], "st_score")
    metrics = {
        "st_rc": st["rc"],
        "st_rc_visual": st["rc_visual"],
        "st_rc_text": st["rc_text"],
        "st_rc_motion": st["rc_motion"],
        "st_rc_motion_encoder": evaluate_motion(encoder, test),
    }
    weights = {"st": st["weights"].to_json()}
    traces = {"st_heads": st["loss_trace"]}
    if all(r.lt_score is not None for r in train + val + test):
        lt = evaluate_multimodal(train, val, test, encoder, heads, cfg["seed"], "lt_score")
        metrics["lt_rc"] = lt["rc"]
        weights["lt"] = lt["weights"].to_json()
        traces["lt_heads"] = lt["loss_trace"]
    return _report("eval", cfg, metrics, fusion_weights=weights, loss_traces=traces)


def _load_manifests(cfg):
    mdir = _manifest_dir(cfg)
    paths = sorted(mdir.glob("*.json"))
    if not paths:
        raise VidmemError(f"no manifests found in {mdir}")
    return [load_manifest(p) for p in paths]


def cmd_summarize(cfg):
    manifests = _load_manifests(cfg)
    mu = cfg["mu"]
    encoder = MotionEncoder.load(_model_path(cfg)) if mu != 0 else None
    results = [summarize(m, encoder, mu, cfg["budget_fraction"]) for m in manifests]
    mean = mean_summary_f1([r.evaluation for r in results])
    metrics = {"f1": mean.f1, "precision": mean.precision, "recall": mean.recall, "mu": mu}
    videos = {m.video_id: r.to_json() for m, r in zip(manifests, results)}
    return _report("summarize", cfg, metrics, videos=videos)


def cmd_grad_check(cfg):
    reports = gradcheck_suite(cfg["seed"], cfg["gradcheck_eps"])
    tol = cfg["gradcheck_tol"]
    metrics = {
        "max_rel_error": max(r.max_rel_error for r in reports),
        "passed": all(r.passed(tol) for r in reports),
        "checks": {r.op_name: r.max_rel_error for r in reports},
    }
    return _report("grad-check", cfg, metrics)


def _tmccl_arm(cfg):
    rows = []
    for seed in cfg["seeds"]:
        records = generate_synthetic(cfg.synthetic(seed))
        train, _, test = split(records, cfg["split"], seed)
        row = {"seed": seed}
        for name, flag in (("without_tmccl", False), ("with_tmccl", True)):
            result = train_motion_encoder(train, cfg.train(seed), flag, cfg.encoder())
            row[name] = evaluate_motion(result.encoder, test)
            logger.info("seed %d %s st_rc %.4f", seed, name, row[name])
        rows.append(row)
    means = {k: float(np.mean([r[k] for r in rows])) for k in ("without_tmccl", "with_tmccl")}
    return {"rows": rows, "means": means, "delta": means["with_tmccl"] - means["without_tmccl"]}


def _mu_arm(cfg):
    synth = cfg.synthetic()
    train, _, _ = split(generate_synthetic(synth), cfg["split"], cfg["seed"])
    encoder = train_motion_encoder(train, cfg.train(), cfg["use_tmccl"], cfg.encoder()).encoder
    manifests, _ = synthetic_corpus(
        synth, cfg["num_videos"], cfg["clips_per_video"],
        memorability_share=cfg["memorability_share"], budget_fraction=cfg["budget_fraction"], seed=cfg["seed"],
    )
    rows = mu_sweep(manifests, encoder, cfg["mu_grid"], cfg["budget_fraction"])
    f1 = {row["mu"]: row["f1"] for row in rows}
    doc = {"rows": rows}
    if 0.5 in f1 and 0.0 in f1:
        doc["delta_mu_0.5_vs_0"] = f1[0.5] - f1[0.0]
    return doc


def cmd_ablation(cfg):
    arms = {}
    for arm in cfg["arms"]:
        if arm == "tmccl":
            arms["tmccl"] = _tmccl_arm(cfg)
        elif arm == "mu":
            arms["mu"] = _mu_arm(cfg)
        else:
            raise ConfigError(f"unknown ablation arm '{arm}' (expected tmccl or mu)")
    metrics = {}
    if "tmccl" in arms:
        metrics["tmccl_delta"] = arms["tmccl"]["delta"]
    if "mu" in arms and "delta_mu_0.5_vs_0" in arms["mu"]:
        metrics["mu_delta"] = arms["mu"]["delta_mu_0.5_vs_0"]
    return _report("ablation", cfg, metrics, arms=arms)


def cmd_show_config(cfg):
    return _report("show-config", cfg, {})


HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "summarize": cmd_summarize,
    "grad-check": cmd_grad_check,
    "ablation": cmd_ablation,
    "show-config": cmd_show_config,
}


# entry point ---------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="vidmem",
        description="Video memorability models, contrastive motion training and memorability-aware summarization.",
        epilog="Configuration keys and defaults:\n" + config_mod.describe(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--seed", type=int, help="override the seed key")
    parser.add_argument("--out", help="override the out key")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args):
    overrides = list(args.set)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"seed must be unsigned, got {args.seed}")
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"out={args.out}")
    return config_mod.load_config(args.config, overrides)


def run(command, cfg):
    """Execute one command, write its report and return it."""
    start = time.perf_counter()
    report = HANDLERS[command](cfg)
    report["wall_clock_seconds"] = time.perf_counter() - start
    path = _out(cfg) / f"{command}.json"
    path.write_text(json.dumps(report, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return report


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        cfg.synthetic().validate()
        cfg.train()
        cfg.heads()
        unknown = set(cfg["arms"]) - {"tmccl", "mu"}
        if unknown:
            raise ConfigError(f"unknown ablation arm(s) {sorted(unknown)} (expected tmccl or mu)")
    except (ConfigError, VidmemError, ValueError) as exc:
        print(f"vidmem: config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(args.command, cfg)
    except ConfigError as exc:
        print(f"vidmem: config error: {exc}", file=sys.stderr)
        return 2
    except (VidmemError, OSError, ValueError, ArithmeticError) as exc:
        print(f"vidmem: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(report["metrics"], indent=2))
    if args.command == "grad-check" and not report["metrics"]["passed"]:
        print("vidmem: gradient check failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
