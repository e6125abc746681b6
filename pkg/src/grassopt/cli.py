"""``grassopt`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 rate check outside its acceptance band.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import experiments
from .config import load_config
from .errors import ConfigError, GrassoptError, NumericalError
from .io import FormatError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 2, 3, 4
COMMANDS = ("simulate", "covtable", "optimize", "evaluate", "ratecheck")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grassopt", description="Inexact Riemannian gradient experiments on Gr(p, n).")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="run a single seed (overrides the config seeds)")
    parser.add_argument("--threads", type=int, default=1,
                        help="BLAS threads (default 1; GRASSOPT_THREADS overrides)")
    parser.add_argument("--point", help="point file for 'evaluate' (point.grmx from 'optimize')")
    return parser


def resolve_threads(cli_value: int) -> int:
    env = os.environ.get("GRASSOPT_THREADS")
    if env is not None and env.strip():
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"GRASSOPT_THREADS must be an integer, got {env!r}") from None
    else:
        value = cli_value
    if value < 1:
        raise ConfigError(f"thread count must be >= 1, got {value}")
    return value


def run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {args.seed}")
        cfg = cfg.replace(seeds=[args.seed])
    out = Path(args.out if args.out is not None else cfg.out)
    if args.command == "evaluate" and not args.point:
        raise ConfigError("evaluate needs --point")
    with threadpool_limits(limits=resolve_threads(args.threads)):
        if args.command == "simulate":
            summary = experiments.run_simulate(cfg, out)
        elif args.command == "covtable":
            summary = experiments.run_covtable(cfg, out)
        elif args.command == "optimize":
            summary = experiments.run_optimize(cfg, out)
        elif args.command == "evaluate":
            summary = experiments.run_evaluate(cfg, out, args.point, args.seed)
        else:
            summary = experiments.run_ratecheck(cfg, out)
    print(json.dumps(_brief(summary), sort_keys=True))
    if args.command == "ratecheck" and not summary["passed"]:
        return EXIT_ACCEPTANCE
    return EXIT_OK


def _brief(summary: dict) -> dict:
    keep = ("command", "config_hash", "auc", "auc_fk", "j_value", "j_star", "passed", "runs")
    return {k: summary[k] for k in keep if k in summary}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (ConfigError, FormatError, FileNotFoundError) as err:
        print(f"grassopt: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as err:
        print(f"grassopt: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GrassoptError as err:
        print(f"grassopt: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
