"""Command-line front end.

Exit codes: 0 success, 2 configuration or input-data error, 3 file I/O
error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from . import batch
from .config import ConfigError, MODES, RunConfig, ingest_counts, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decoyqkd",
        description="Finite-key rate bounds for two-intensity decoy-state QKD.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "scan": "key rate versus distance for each configured data size",
        "max-distance": "largest distance with a positive key rate, per data size",
        "validate": "Monte Carlo check of an estimator's failure probability",
        "rate-from-counts": "key rates from a measured counts file",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--mode", choices=MODES, help="estimator coefficient variant")
        if name in ("scan", "max-distance"):
            p.add_argument("--workers", type=int, default=1,
                           help="parallel worker processes (output order is fixed)")
        if name == "rate-from-counts":
            p.add_argument("--counts", required=True, help="single-record counts CSV")
    return parser


def _config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.out is not None:
        overrides["out"] = args.out
    return dataclasses.replace(config, **overrides) if overrides else config


def _emit(text: str, path: str) -> None:
    if path:
        batch.write_text(text, path)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config(args)
        if args.command == "scan":
            text = batch.run_scan(config, args.workers)
        elif args.command == "max-distance":
            text = batch.run_max_distance(config, args.workers)
        elif args.command == "validate":
            _, text = batch.run_validate(config)
        else:
            text = batch.rate_from_counts(config, ingest_counts(args.counts))
        _emit(text, config.out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, ValueError) as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
