"""Command-line interface.

Subcommands: ``weights-qp``, ``weights-lp``, ``sample``, ``oracle``,
``diagnose``, ``reproduce-s4``. Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

# Defaults for reproduce-s4 when no config is given: the 26 x 26 square grid.
_SQUARE_DEFAULTS = "[grid]\naxes = 0:5:0.2, 0:5:0.2\n[sampler]\nn_samples = 5000\n"


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI run configuration")
    common.add_argument("--seed", type=_seed, required=True, help="random seed (unsigned 64-bit)")
    common.add_argument("--out", type=Path, required=True, help="output directory (created if missing)")
    common.add_argument("--threads", type=int, default=None,
                        help="BLAS threads; effective when the CLI starts numpy itself")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="brsup", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("weights-qp", parents=[common], help="estimate Sigma and solve the weight QP")
    sub.add_parser("weights-lp", parents=[common], help="optimise rejection weights and epsilon")
    sub.add_parser("sample", parents=[common], help="run the configured sampler variant")
    sub.add_parser("oracle", parents=[common], help="exact small-N argmax tables and samples")
    d = sub.add_parser("diagnose", parents=[common], help="diagnostics for a sample run")
    d.add_argument("--input", type=Path, default=None, help="directory written by 'sample'")
    sub.add_parser("reproduce-s4", parents=[common], help="full square-grid pipeline with a comparison report")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    # numerical modules are imported after the thread settings
    import numpy as np
    from scipy.linalg import LinAlgError

    from . import commands
    from .config import ConfigError, load_config, parse_config
    from .model import ModelError
    from .oracle import OracleError
    from .samplers import BoundViolation
    from .simplex import SimplexError

    try:
        if args.config is not None:
            cfg = load_config(args.config)
        elif args.command == "reproduce-s4":
            cfg = parse_config(_SQUARE_DEFAULTS)
        else:
            raise ConfigError("--config is required for this subcommand")
        try:
            args.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {args.out}: {exc.strerror}") from None
        if args.command == "weights-qp":
            commands.cmd_weights_qp(cfg, args.seed, args.out)
        elif args.command == "weights-lp":
            commands.cmd_weights_lp(cfg, args.seed, args.out)
        elif args.command == "sample":
            commands.cmd_sample(cfg, args.seed, args.out)
        elif args.command == "oracle":
            commands.cmd_oracle(cfg, args.seed, args.out)
        elif args.command == "diagnose":
            commands.cmd_diagnose(cfg, args.seed, args.out, args.input)
        else:
            report = commands.cmd_reproduce(cfg, args.seed, args.out)
            for row in report["comparison"]:
                mark = "ok " if row["within"] else "off"
                print(f"{mark} {row['quantity']:<20} {row['value']:10.4f}  (reference {row['reference']})")
            times = ", ".join(f"{k} {v:.1f}s" for k, v in report["_timings"].items())
            print(f"timings: {times}", file=sys.stderr)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, SimplexError, BoundViolation, OracleError, LinAlgError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
