"""Command line entry point: ``gapsched {learn,bench,gaps,angles,validate}``.

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .harness import ConfigError, load_config, load_curves, run_bench_phase, run_learning_phase
from .problems import GraphInstance, ProblemError, load_instance, to_ising
from .schedule import BezierGapCurve, ScheduleError, derive_angles
from .spectrum import SpectrumError, default_grid, gap_profile

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG = 0, 1, 2


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_learn(args) -> int:
    cfg = load_config(args.config)
    art = run_learning_phase(cfg)
    for kind, curve in art.curves.items():
        print(f"{kind}: degree {curve.degree}, rms residual {curve.rms_residual:.4g}")
    print(f"wrote learning artifacts to {cfg.out_path}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    curves = load_curves(args.curves)
    records = run_bench_phase(cfg, curves, args.curves)
    failed = sum(1 for r in records if r.error)
    print(f"{len(records)} rows ({failed} failed) written to {cfg.out_path}")
    return EXIT_OK


def cmd_gaps(args) -> int:
    inst = load_instance(args.instance)
    model = to_ising(inst).oriented()
    if isinstance(inst, GraphInstance):
        logging.getLogger(__name__).info("graph instance: gaps of the sign-flipped cut Hamiltonian")
    _emit(gap_profile(model, default_grid(args.grid)).to_csv(), args.out)
    return EXIT_OK


def cmd_angles(args) -> int:
    curve = BezierGapCurve.load(args.curve)
    _emit(derive_angles(args.p, args.kappa, args.q, curve).to_csv(), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation import run_all

    return EXIT_OK if run_all() else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gapsched", description="Learn gap-shaped QAOA schedules and benchmark them.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="sample gap profiles and fit Bezier curves")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("bench", help="run the heuristic vs vanilla QAOA sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--curves", required=True, help="directory holding curve_mean.json / curve_median.json")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gaps", help="gap profile of a single instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gaps)

    p = sub.add_parser("angles", help="closed-form angle schedule from a curve")
    p.add_argument("--curve", required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_angles)

    p = sub.add_parser("validate", help="ODE-vs-circuit and brute-force invariant checks")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ProblemError, ScheduleError, SpectrumError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
