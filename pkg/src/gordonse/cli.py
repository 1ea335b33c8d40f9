"""Command-line entry point: ``gordonse <subcommand> [options]``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from .config import ConfigError, RunConfig, load_config
from .experiments import (RATE_ADVICE, classify_rate, property_suite, resolve_threads,
                          simulate, verify_oracle, write_csv)
from .figures import FIGURES, UnknownFigureError, reproduce_figure


def _out_dir(args, cfg: Optional[RunConfig] = None) -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.output.directory if cfg else "out")


def _load(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    return load_config(args.config)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    summary = simulate(cfg, out, args.seed, resolve_threads(args.threads))
    print(f"wrote {out}/trajectories.csv, predictions.csv, summary.json "
          f"({summary['trials']} trials x {summary['T']} iterations)")
    if summary["eta_advisory"]:
        print("note: stepsize above 1/2; convergence guarantees do not cover this regime",
              file=sys.stderr)
    return 0


def cmd_verify_oracle(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    table, failures = verify_oracle(cfg, out, args.seed, resolve_threads(args.threads))
    print(f"wrote {out}/oracle.csv ({len(table)} rows)")
    if failures:
        for row in failures:
            print(f"FAIL {row[0]} state={row[1]} sigma={row[2]} {row[3]}: "
                  f"closed={row[4]:.6g} mc={row[5]:.6g} z={row[7]:.2f}", file=sys.stderr)
        return 1
    return 0


def cmd_reproduce_figure(args) -> int:
    if not args.figure:
        print(f"--figure is required; valid ids: {', '.join(FIGURES)}", file=sys.stderr)
        return 2
    out = _out_dir(args)
    seed = 0 if args.seed is None else args.seed
    reproduce_figure(args.figure, args.scale, out, seed, resolve_threads(args.threads))
    print(f"wrote {out}/figure_{args.figure}.csv and figure_{args.figure}.svg")
    return 0


def cmd_classify_rate(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    rows, insufficient = classify_rate(cfg, out, args.seed, resolve_threads(args.threads))
    for r in rows:
        if r[-1] == "ok":
            print(f"{r[0]:>15}: lambda={r[3]:.4f} coefficient={r[4]:.4g} floor={r[5]:.3g} "
                  f"{r[9] or 'unlabelled'}")
        else:
            print(f"{r[0]:>15}: {RATE_ADVICE}", file=sys.stderr)
    return 1 if "gordon" in insufficient else 0


def cmd_property_suite(args, maps=None) -> int:
    rows = property_suite(maps)
    for r in rows:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.3e} ({r.detail})")
    if args is not None and getattr(args, "out", None):
        write_csv(Path(args.out) / "properties.csv", ["check", "passed", "value", "detail"],
                  ((r.name, int(r.passed), r.value, r.detail) for r in rows))
    failed = [r for r in rows if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(rows)} checks failed: "
              + ", ".join(f"{r.name} ({r.value:.3e})" for r in failed), file=sys.stderr)
        return 1
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "verify-oracle": cmd_verify_oracle,
    "reproduce-figure": cmd_reproduce_figure,
    "classify-rate": cmd_classify_rate,
    "property-suite": cmd_property_suite,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gordonse",
        description="Simulate iterative estimators and compare them with deterministic "
                    "state-evolution predictions.")
    parser.add_argument("command", choices=list(COMMANDS))
    parser.add_argument("--config", help="flat section.key = value config file")
    parser.add_argument("--figure", help=f"figure id, one of {', '.join(FIGURES)}")
    parser.add_argument("--scale", choices=("native", "desk"), default="native")
    parser.add_argument("--out", help="output directory (overrides output.directory)")
    parser.add_argument("--seed", type=int, help="overrides run.seed")
    parser.add_argument("--threads", type=int,
                        help="worker threads (default: $GORDONSE_THREADS or 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UnknownFigureError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
