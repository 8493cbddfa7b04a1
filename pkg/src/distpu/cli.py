"""Command-line harness.

Verbs: gen-data, train, ablate, sweep, eval. Every run is driven by a YAML
config plus the three named seeds; CLI seed flags override the config so that
repeated-seed protocols need no file edits.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import ConfigError, ContractError, DataFormatError, TrainingDiverged
from .experiment import (
    ExperimentConfig,
    gen_data,
    load_config,
    run_ablation,
    run_eval,
    run_sweep,
    run_training,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="YAML config (or a run manifest)")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed-data", type=int, default=None)
    parser.add_argument("--seed-init", type=int, default=None)
    parser.add_argument("--seed-train", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distpu",
        description="PU learning experiments: label distribution alignment and baselines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write synthetic train/test CSVs plus metadata")
    _add_common(p)

    p = sub.add_parser("train", help="train one model and evaluate on the test set")
    _add_common(p)

    p = sub.add_parser("ablate", help="run objective-term variants with shared seeds")
    _add_common(p)
    p.add_argument(
        "--variant",
        required=True,
        help="comma-separated variant names from I..VIII, e.g. I,II,VIII",
    )

    p = sub.add_parser("sweep", help="grid over mu/nu/gamma/alpha from the config's sweep block")
    _add_common(p)
    p.add_argument("--parallel", type=int, default=1, help="worker processes (>1 relaxes bitwise determinism)")
    p.add_argument("--allow-out-of-range", action="store_true", help="permit grid values outside the searched ranges")

    p = sub.add_parser("eval", help="evaluate a checkpoint on the config's test set")
    _add_common(p)
    p.add_argument("--checkpoint", required=True, help="path to a saved checkpoint")
    return parser


def _resolve(args) -> tuple[ExperimentConfig, str]:
    cfg = load_config(args.config)
    seeds = cfg.seeds
    if args.seed_data is not None:
        seeds = replace(seeds, data=args.seed_data)
    if args.seed_init is not None:
        seeds = replace(seeds, init=args.seed_init)
    if args.seed_train is not None:
        seeds = replace(seeds, train=args.seed_train)
    for value in (seeds.data, seeds.init, seeds.train):
        if value < 0:
            raise ConfigError("seeds must be non-negative integers")
    cfg = replace(cfg, seeds=seeds)
    out_dir = args.out if args.out is not None else cfg.output_dir
    return cfg, out_dir


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, out_dir = _resolve(args)
        if args.command == "gen-data":
            files = gen_data(cfg, out_dir)
            print(f"wrote {len(files)} files to {out_dir}")
        elif args.command == "train":
            result = run_training(cfg, out_dir)
            print(f"test metrics: {result.report.to_json_dict()}")
            print(f"artifacts in {result.out_dir}")
        elif args.command == "ablate":
            variants = [v.strip() for v in args.variant.split(",") if v.strip()]
            table = run_ablation(cfg, variants, out_dir)
            print(f"ablation table: {table}")
        elif args.command == "sweep":
            table = run_sweep(
                cfg, out_dir, parallel=args.parallel,
                allow_out_of_range=args.allow_out_of_range,
            )
            print(f"sweep table: {table}")
        elif args.command == "eval":
            result = run_eval(cfg, args.checkpoint, out_dir)
            print(f"test metrics: {result.report.to_json_dict()}")
    except (ConfigError, ContractError, DataFormatError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
