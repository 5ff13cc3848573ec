"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 inconclusive analysis,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Callable, Sequence

from . import __version__, runner
from .config import RunConfig, load_config
from .errors import ConfigurationError, DomainError, InconclusiveError, MonotonicityError, QuadratureError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3
EXIT_NUMERICAL = 4

log = logging.getLogger("qsurvival")

_COMMANDS: dict[str, tuple[Callable[[RunConfig], runner.CommandResult], str]] = {
    "propagate": (runner.cmd_propagate, "site occupation from two independent propagation routes"),
    "survival": (runner.cmd_survival, "ensemble survival and first-detection series"),
    "scan": (runner.cmd_scan, "lattice-size family with exponent fits, crossovers and collapse"),
    "rate-function": (runner.cmd_rate_function, "large-deviation rate function for a finite interval law"),
    "synthetic": (runner.cmd_synthetic, "scaling analysis on planted series (self-test)"),
}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsurvival", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--seed", type=_u64, help="master seed, overrides [run].master_seed")
        p.add_argument("--workers", type=_positive, help="worker processes, overrides [run].workers")
        p.add_argument("--out", help="output directory, overrides [run].out")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which is also the config-error code.
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    command, _ = _COMMANDS[args.command]
    try:
        cfg = load_config(args.config)
        cfg = runner.apply_overrides(cfg, seed=args.seed, workers=args.workers, out=args.out)
        log.info("running %s into %s", args.command, cfg.run.out)
        result = command(cfg)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InconclusiveError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (QuadratureError, MonotonicityError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for path in result.outputs.values():
        log.info("wrote %s", path)
    if not result.conclusive:
        print(f"inconclusive analysis; details in {result.out_dir}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
