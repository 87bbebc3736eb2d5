"""kesten <command> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance failure (reproduce only).
"""
from __future__ import annotations

import argparse
import sys

from . import _parallel, spectral
from .config import COMMANDS, ConfigError, RunConfig, U64, load
from .linalg import Singular

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 2, 3, 4


def _u64(text):
    v = int(text, 0)
    if not 0 <= v <= U64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kesten", description="Monte Carlo toolkit for random affine recursions")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration (optional for reproduce)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    p.add_argument("--threads", type=int, help="worker threads; KESTEN_THREADS takes precedence")
    p.add_argument("--only", type=int, nargs="*", help="reproduce: run only these criteria")
    return p


def main(argv=None) -> int:
    from .commands import COMMANDS as RUN
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = load(args.config)
            if cfg.command != args.command:
                raise ConfigError(f"config is for {cfg.command!r}, not {args.command!r}")
        elif args.command == "reproduce":
            cfg = RunConfig("reproduce", out="reproduce_out")
        else:
            raise ConfigError(f"{args.command} needs --config")
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out:
            cfg.out = args.out
        cfg.validate()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None:
        _parallel.set_threads(args.threads)
    try:
        if args.command == "reproduce":
            bundle = RUN["reproduce"](cfg, cfg.out, only=args.only)
        else:
            bundle = RUN[args.command](cfg, cfg.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (spectral.NumericalFailure, spectral.NoRoot, spectral.DegenerateESS, Singular) as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{bundle.command}: {bundle.summary} -> {cfg.out}")
    if args.command == "reproduce" and not bundle.ok:
        return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
