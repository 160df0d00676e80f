"""Command-line entry point: synth, ingest, train, eval, ablate, gradcheck.

Every subcommand resolves one RunConfig (defaults < config file < --set/--seed
flags < PATHMATCH_SEED environment variable), prints it, and exits with:
0 success, 2 usage error, 3 bad config, 4 missing file, 1 any other failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, config_hash, load_config_file, resolve_config
from .data import (
    DataError,
    SynthConfig,
    assemble_examples,
    generate_synthetic,
    ingest_events,
    read_examples,
    split_by_user,
    write_examples,
)
from .metrics import MetricError, emit_report, make_report
from .model import encode_dataset, init_params, named_params, restore_params
from .train import GRADCHECK_TOL, evaluate, run_miniature_gradcheck, train_model

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2  # argparse's own code for bad flags
EXIT_CONFIG = 3
EXIT_MISSING = 4

ABLATION_VARIANTS = (
    ("full", {}),
    ("no_enhance", {"use_enhance": False}),
    ("no_match", {"use_match": False}),
    ("no_contrast", {"use_contrast": False}),
)


def variant_name(cfg: RunConfig) -> str:
    off = [
        name
        for name, flag in (
            ("no_enhance", cfg.use_enhance),
            ("no_match", cfg.use_match),
            ("no_contrast", cfg.use_contrast),
        )
        if not flag
    ]
    return "+".join(off) if off else "full"


# ---------------------------------------------------------------------------
# config resolution
# ---------------------------------------------------------------------------


def _parse_override(item: str) -> tuple[str, object]:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
    try:
        value: object = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings like --set pool_paths=sum
    return key, value


def resolve_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    flag_values: dict[str, object] = {}
    for item in args.overrides:
        key, value = _parse_override(item)
        flag_values[key] = value
    if getattr(args, "seed", None) is not None:
        flag_values["seed"] = args.seed
    cfg = resolve_config(file_values, flag_values)
    env = os.environ.get("PATHMATCH_SEED")
    if env is not None:
        try:
            cfg.seed = int(env)
        except ValueError as e:
            raise ConfigError(f"PATHMATCH_SEED must be an integer, got {env!r}") from e
        cfg.validate()
    return cfg


def _log_config(cfg: RunConfig, label: str) -> None:
    print(f"[pathmatch {__version__}] {label}: seed={cfg.seed} config_hash={config_hash(cfg)}")
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = resolve_from_args(args)
    _log_config(cfg, "synth")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    examples = generate_synthetic(SynthConfig.from_run_config(cfg))
    train, test = split_by_user(examples, cfg.test_frac, cfg.seed)
    write_examples(out / "train.jsonl", train)
    write_examples(out / "test.jsonl", test)
    meta = {"config": cfg.to_dict(), "config_hash": config_hash(cfg),
            "n_train": len(train), "n_test": len(test)}
    (out / "synth_config.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(train)} train / {len(test)} test examples to {out}")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = resolve_from_args(args)
    _log_config(cfg, "ingest")
    csv_path = _require(Path(args.csv), "event log")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = ingest_events(csv_path, t_max=cfg.t_max)
    rng = np.random.default_rng([cfg.seed, 4])
    examples, skipped_users = assemble_examples(
        result.users, cfg.path_len, cfg.hist_paths, cfg.neg_ratio, rng, t_max=cfg.t_max
    )
    train, test = split_by_user(examples, cfg.test_frac, cfg.seed)
    write_examples(out / "train.jsonl", train)
    write_examples(out / "test.jsonl", test)
    meta = {
        "lines_total": result.total,
        "lines_skipped": result.skipped,
        "users": len(result.users),
        "users_skipped_no_click": skipped_users,
        "n_train": len(train),
        "n_test": len(test),
        "config_hash": config_hash(cfg),
    }
    (out / "ingest_summary.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(
        f"ingested {result.total} lines ({result.skipped} skipped), "
        f"{len(result.users)} users -> {len(train)} train / {len(test)} test examples"
    )
    return EXIT_OK


def _train_and_eval(cfg: RunConfig, train_exs, test_exs, log=print):
    """Shared by train and ablate: returns (params, eval dict, seconds)."""
    t0 = time.perf_counter()
    train_batch = encode_dataset(train_exs, cfg)
    test_batch = encode_dataset(test_exs, cfg)
    params = init_params(cfg)
    train_model(cfg, train_batch, params=params, log=log)
    result = evaluate(params, test_batch)
    return params, result, time.perf_counter() - t0


def _load_split(data_dir: Path, cfg: RunConfig):
    train_path = _require(data_dir / "train.jsonl", "training set")
    test_path = _require(data_dir / "test.jsonl", "test set")
    return read_examples(train_path, cfg.t_max), read_examples(test_path, cfg.t_max)


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_from_args(args)
    _log_config(cfg, "train")
    data_dir = _require(Path(args.data), "data directory")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_exs, test_exs = _load_split(data_dir, cfg)
    params, result, seconds = _train_and_eval(cfg, train_exs, test_exs)
    arrays = {k: t.data for k, t in named_params(params).items()}
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "n_arrays": len(arrays),
        "n_train": len(train_exs),
    }
    save_checkpoint(out, arrays, manifest)
    report = make_report(
        result["preds"],
        result["labels"],
        config_hash=config_hash(cfg),
        seconds=seconds,
        baseline_auc=cfg.baseline_auc,
        mode=cfg.relaimpr_mode,
        run_id=out.name,
        variant=variant_name(cfg),
        l=cfg.path_len,
        k1=cfg.k1,
        k2=cfg.k2,
        lam=cfg.contrast_weight,
    )
    emit_report(report, out / "report.json")
    print(f"test auc {report.auc:.4f} logloss {report.logloss:.4f} ({seconds:.1f}s) -> {out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    ckpt_dir = _require(Path(args.checkpoint), "checkpoint directory")
    arrays, manifest = load_checkpoint(ckpt_dir)
    cfg = resolve_config(manifest["config"], {})
    _log_config(cfg, "eval")
    data = Path(args.data)
    if data.is_dir():
        data = data / "test.jsonl"
    _require(data, "evaluation set")
    t0 = time.perf_counter()
    examples = read_examples(data, cfg.t_max)
    batch = encode_dataset(examples, cfg)
    params = init_params(cfg)
    restore_params(params, arrays)
    result = evaluate(params, batch)
    seconds = time.perf_counter() - t0
    out = Path(args.out) if args.out else ckpt_dir
    out.mkdir(parents=True, exist_ok=True)
    report = make_report(
        result["preds"],
        result["labels"],
        config_hash=manifest["config_hash"],
        seconds=seconds,
        baseline_auc=cfg.baseline_auc,
        mode=cfg.relaimpr_mode,
        run_id=ckpt_dir.name,
        variant=variant_name(cfg),
        l=cfg.path_len,
        k1=cfg.k1,
        k2=cfg.k2,
        lam=cfg.contrast_weight,
    )
    emit_report(report, out / "eval_report.json")
    print(f"eval auc {report.auc:.4f} logloss {report.logloss:.4f} on {report.n} examples")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = resolve_from_args(args)
    _log_config(cfg, "ablate")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.data:
        train_exs, test_exs = _load_split(Path(args.data), cfg)
    else:
        examples = generate_synthetic(SynthConfig.from_run_config(cfg))
        train_exs, test_exs = split_by_user(examples, cfg.test_frac, cfg.seed)
    baseline: Optional[float] = cfg.baseline_auc
    rows = []
    for name, toggles in ABLATION_VARIANTS:
        vcfg = resolve_config(cfg.to_dict(), toggles)
        _, result, seconds = _train_and_eval(vcfg, train_exs, test_exs, log=None)
        if name == "full" and baseline is None:
            baseline = result["auc"]
        report = make_report(
            result["preds"],
            result["labels"],
            config_hash=config_hash(vcfg),
            seconds=seconds,
            baseline_auc=baseline,
            mode=cfg.relaimpr_mode,
            run_id=out.name,
            variant=name,
            l=vcfg.path_len,
            k1=vcfg.k1,
            k2=vcfg.k2,
            lam=vcfg.contrast_weight,
        )
        emit_report(report, out / f"report_{name}.json")
        rows.append((name, report.auc, report.logloss, report.relaimpr_pct))
        print(f"{name:12s} auc {report.auc:.4f} logloss {report.logloss:.4f} "
              f"relaimpr {report.relaimpr_pct:+.2f}% ({seconds:.1f}s)")
    worst = min(rows[1:], key=lambda r: r[1])
    print(f"largest drop: {worst[0]} ({rows[0][1] - worst[1]:+.4f} auc below full)")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    err, seconds = run_miniature_gradcheck()
    ok = err < GRADCHECK_TOL
    print(f"miniature model max relative gradient error {err:.3e} "
          f"({seconds:.1f}s, tolerance {GRADCHECK_TOL:.0e}): {'OK' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAILURE


# ---------------------------------------------------------------------------
# parser / dispatch
# ---------------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override one config field (repeatable)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathmatch",
        description="Behavior-path CTR model: data generation, training, evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic train/test split")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="build examples from a CSV event log")
    _add_config_flags(p)
    p.add_argument("--csv", required=True, help="user,item,category,type,timestamp lines")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train on a data directory and write a checkpoint")
    _add_config_flags(p)
    p.add_argument("--data", required=True, help="directory holding train.jsonl/test.jsonl")
    p.add_argument("--out", required=True, help="run directory for checkpoint and report")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a JSONL example file")
    p.add_argument("--checkpoint", required=True, help="directory written by train")
    p.add_argument("--data", required=True, help="JSONL file (or directory with test.jsonl)")
    p.add_argument("--out", default=None, help="report directory (default: checkpoint dir)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train all module-toggle variants and compare")
    _add_config_flags(p)
    p.add_argument("--data", default=None, help="data directory (default: fresh synthetic)")
    p.add_argument("--out", default="ablate_out", help="directory for reports")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference check of the miniature model")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"missing file: {e}", file=sys.stderr)
        return EXIT_MISSING
    except (DataError, CheckpointError, MetricError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
