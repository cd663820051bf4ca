"""Command-line driver: train, eval, traverse, sweep, gradcheck.

The output root is the config's output_dir unless the TCWAE_OUT environment
variable overrides it. Invalid configs exit with status 2 and a message
naming the offending field.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config


def _out_root(cfg_output_dir: str) -> str:
    return os.environ.get("TCWAE_OUT") or cfg_output_dir


def _load_config_or_exit(path: str):
    try:
        return load_config(path)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(2)
    except FileNotFoundError:
        print(f"error: config file not found: {path}", file=sys.stderr)
        sys.exit(2)


def cmd_train(args) -> int:
    from .experiment import run_training

    cfg = _load_config_or_exit(args.config)
    run_dir = run_training(cfg, out_root=_out_root(cfg.output_dir))
    print(run_dir)
    return 0


def cmd_eval(args) -> int:
    from .experiment import run_eval

    try:
        rows = run_eval(args.run_dir)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for row in rows:
        print(
            f"seed {row['seed']}: mse={row['mse']:.4f} mig={row['mig']:.4f} "
            f"factor_vae={row['factor_vae']:.4f} sap={row['sap']:.4f}"
        )
    print(Path(args.run_dir) / "scores.csv")
    return 0


def cmd_traverse(args) -> int:
    from .experiment import run_traverse

    lo, hi = (float(v) for v in args.range.split(","))
    try:
        paths = run_traverse(args.run_dir, steps=args.steps, value_range=(lo, hi), rows=args.rows)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


def cmd_sweep(args) -> int:
    from .sweep import run_sweep

    cfg = _load_config_or_exit(args.config)
    try:
        sweep_dir = run_sweep(cfg, out_root=_out_root(cfg.output_dir), workers=args.workers)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(sweep_dir)
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import finite_difference_report, format_report

    reports = finite_difference_report(corrupt=args.corrupt)
    text = format_report(reports)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0 if all(r.passed for r in reports) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tcwae", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train every seed of a config")
    p.add_argument("config")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="score a trained run directory")
    p.add_argument("run_dir")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("traverse", help="emit latent-traversal image grids")
    p.add_argument("run_dir")
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--range", default="-4,4")
    p.add_argument("--rows", type=int, default=4)
    p.set_defaults(fn=cmd_traverse)

    p = sub.add_parser("sweep", help="train + eval a beta/gamma grid")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("gradcheck", help="finite-difference check of all objectives")
    p.add_argument("--corrupt", default=None, help="internal test hook: corrupt one block")
    p.add_argument("--out", default=None, help="also write the report to a file")
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
