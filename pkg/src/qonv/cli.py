"""Command line entry points.

    qonv run <config-file> [--out DIR] [--jobs N] [--seed-offset K]
    qonv theory --instances N --max-size M [--seed S] [--out DIR]
    qonv bound --c C --eps E1,E2,... [--out DIR]

Exit codes: 0 pass, 1 assertion failure, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ExperimentConfig, load_config
from .errors import (ConfigurationError, ContractError, DimensionError,
                     ImageIOError)
from .harness import run_experiment

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qonv",
        description="Neural-field regression experiments and risk oracles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("config", help="path to the experiment config")
    run.add_argument("--out", default=None, help="override the output directory")
    run.add_argument("--jobs", type=int, default=1,
                     help="worker processes for independent (model, seed) runs")
    run.add_argument("--seed-offset", type=int, default=0,
                     help="added to every configured seed")

    theory = sub.add_parser("theory", help="randomized risk-chain suite")
    theory.add_argument("--instances", type=int, default=1000)
    theory.add_argument("--max-size", type=int, default=16)
    theory.add_argument("--seed", type=int, default=0)
    theory.add_argument("--out", default="results/theory")

    bound = sub.add_parser("bound", help="Gaussian-count bound table")
    bound.add_argument("--c", type=float, required=True,
                       help="the bound's scale constant")
    bound.add_argument("--eps", required=True,
                       help="comma-separated target MSE values")
    bound.add_argument("--out", default="results/bound")

    return parser


def _theory_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        kind="theory", seeds=(0,), out_dir=args.out,
        theory={"instances": args.instances, "max_size": args.max_size,
                "seed": args.seed, "shift_mode": "wrap"},
    )


def _bound_config(args) -> ExperimentConfig:
    try:
        eps = tuple(float(tok) for tok in args.eps.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse --eps {args.eps!r}") from exc
    return ExperimentConfig(kind="bound_table", seeds=(0,), out_dir=args.out,
                            bound={"c": args.c, "eps": eps})


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            record, failures = run_experiment(cfg, out_dir=args.out,
                                              jobs=args.jobs,
                                              seed_offset=args.seed_offset)
        elif args.command == "theory":
            cfg = _theory_config(args)
            record, failures = run_experiment(cfg)
        else:
            cfg = _bound_config(args)
            record, failures = run_experiment(cfg)
    except (ConfigurationError, DimensionError, ContractError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ImageIOError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    out_dir = args.out or cfg.out_dir
    print(f"{cfg.kind}: results in {out_dir} (config {record.config_hash})")
    if failures:
        for line in failures:
            print(f"FAIL {line}", file=sys.stderr)
        return EXIT_ASSERTION
    print("all configured assertions passed" if cfg.assertions
          else "no assertions configured")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
