"""Command-line entry point.

Subcommands: simulate (one gradient-descent run to CSV), population (the
infinite-sample reference run), bundle (leave-one-out / random-sign companion
sequences with difference curves), verify (Monte Carlo concentration suites),
and figure (a named experiment family). Exit codes: 0 success, 1 usage error,
2 divergence, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, verification
from .harness import (BASE_COLUMNS, FIGURE_IDS, ExperimentSpec, execute_plan,
                      run_experiment, write_csv, write_json, _base_plan, _label)
from .model import DESIGN_KINDS, GAUSSIAN
from .solver import DivergenceError, INIT_MODES, INIT_RANDOM

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGENCE = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is exit code 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_run_flags(p: _Parser, with_design=True):
    p.add_argument("--n", type=int, default=100, help="signal dimension")
    p.add_argument("--m", type=int, default=None, help="sample count (default 10n)")
    p.add_argument("--eta", type=float, default=0.1, help="step size (positive)")
    p.add_argument("--seed", type=int, default=0, help="experiment seed")
    p.add_argument("--iters", type=int, default=500, help="iteration cap")
    p.add_argument("--tol", type=float, default=1e-5, help="relative dist threshold")
    p.add_argument("--record-every", type=int, default=1, metavar="K",
                   help="record diagnostics every K iterations")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    if with_design:
        p.add_argument("--design", choices=DESIGN_KINDS, default=GAUSSIAN)
        p.add_argument("--init", choices=INIT_MODES, default=INIT_RANDOM)
        p.add_argument("--init-file", type=Path, default=None,
                       help="vector file (one value per line) for --init fixed")
        p.add_argument("--signal", choices=("e1", "random"), default="e1")


def build_parser() -> _Parser:
    parser = _Parser(prog="wflow", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="one gradient-descent run")
    _add_run_flags(p_sim)

    p_pop = sub.add_parser("population", help="infinite-sample reference run")
    _add_run_flags(p_pop, with_design=False)

    p_bun = sub.add_parser("bundle", help="leave-one-out / random-sign sequences")
    _add_run_flags(p_bun)
    p_bun.add_argument("--loo-count", type=int, default=5, metavar="K",
                       help="number of sampled leave-one-out indices")

    p_ver = sub.add_parser("verify", help="Monte Carlo concentration suites")
    p_ver.add_argument("--suite", choices=("maxima", "hessian", "smoothness",
                                           "poly", "all"), default="all")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--trials", type=int, default=50)
    p_ver.add_argument("--out", type=Path, default=Path("out"))

    p_fig = sub.add_parser("figure", help="run a named experiment family")
    p_fig.add_argument("figure_id", choices=FIGURE_IDS)
    p_fig.add_argument("--out", type=Path, default=Path("out"))
    p_fig.add_argument("--seeds", type=str, default="0",
                       help="comma-separated seed list")
    p_fig.add_argument("--n", type=int, default=None)
    p_fig.add_argument("--m", type=int, default=None)
    p_fig.add_argument("--eta", type=float, default=None)
    p_fig.add_argument("--iters", type=int, default=None)
    p_fig.add_argument("--loo-count", type=int, default=None)
    return parser


def _validate_run_args(parser, args) -> None:
    if args.eta is not None and args.eta <= 0:
        parser.error("--eta must be positive")
    if args.n is not None and args.n < 2:
        parser.error("--n must be at least 2")
    if args.m is not None and args.m < 1:
        parser.error("--m must be at least 1")
    if args.tol is not None and args.tol < 0:
        parser.error("--tol must be nonnegative")
    if args.iters is not None and args.iters < 0:
        parser.error("--iters must be nonnegative")
    if args.record_every is not None and args.record_every < 1:
        parser.error("--record-every must be at least 1")


def _plan_from_args(args, kind: str) -> dict:
    plan = _base_plan(kind=kind, n=args.n, m=args.m, eta=args.eta,
                      max_iters=args.iters, tol=args.tol,
                      record_every=args.record_every, seed=args.seed)
    if kind != "population":
        plan["design"] = args.design
        plan["init"] = args.init
        plan["signal"] = args.signal
        if args.init == "fixed":
            if args.init_file is None:
                raise SystemExit(EXIT_USAGE)
            plan["x0"] = np.loadtxt(args.init_file).tolist()
    if kind == "bundle":
        plan["loo_count"] = args.loo_count
    if plan["m"] is None:
        plan["m"] = 10 * plan["n"]
    plan["label"] = _label({"gd": "simulate", "population": "population",
                            "bundle": "bundle"}[kind], plan)
    return plan


def _run_single(parser, args, kind: str) -> int:
    _validate_run_args(parser, args)
    plan = _plan_from_args(args, kind)
    try:
        columns, table, sidecar = execute_plan(plan)
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        csv_path = args.out / f"{plan['label']}.csv"
        write_csv(csv_path, columns, table)
        write_json(args.out / f"{plan['label']}.json", sidecar)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    print(csv_path)
    return EXIT_OK


def _run_verify(args) -> int:
    seed, trials = args.seed, args.trials
    reports = {}
    if args.suite in ("maxima", "all"):
        reports.update(verification.check_design_maxima(
            n=100, m=10_000, trials=trials, seed=seed))
    if args.suite in ("hessian", "all"):
        reports["hessian_concentration"] = verification.check_hessian_concentration(
            n=50, m_list=(2000, 8000, 32000), trials=max(8, trials // 2), seed=seed)
    if args.suite in ("smoothness", "all"):
        reports["local_smoothness"] = verification.check_local_smoothness(
            n=100, m=10_000, z_samples=trials, seed=seed)
    if args.suite in ("poly", "all"):
        for case in sorted(verification.POLY_CASES):
            reports[f"polynomial_case{case}"] = verification.check_polynomial_concentration(
                case, n=50, m=100_000, trials=max(10, trials // 2), seed=seed)
    payload = {}
    for name, rep in sorted(reports.items()):
        payload[name] = {
            "statistic": rep.statistic_name,
            "trials": rep.trials,
            "bound": rep.bound,
            "violation_rate": rep.violation_rate,
            "scaling_slope": rep.scaling_slope,
            "median_observed": float(np.median(rep.observed)) if rep.trials else None,
            "extras": {k: v for k, v in rep.extras.items() if k != "per_m"},
        }
        print(f"{name}: violation_rate={rep.violation_rate:.3f}"
              + (f" slope={rep.scaling_slope:.3f}" if rep.scaling_slope is not None else ""))
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        write_json(args.out / "verification.json", payload)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _run_figure(args) -> int:
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    except ValueError:
        print("error: --seeds must be a comma-separated integer list", file=sys.stderr)
        return EXIT_USAGE
    overrides = {}
    if args.n is not None:
        overrides["n"] = args.n
    if args.m is not None:
        overrides["m"] = args.m
    if args.eta is not None:
        overrides["eta"] = args.eta
    if args.iters is not None:
        overrides["max_iters"] = args.iters
    if args.loo_count is not None:
        overrides["loo_count"] = args.loo_count
    spec = ExperimentSpec(figure_id=args.figure_id, overrides=overrides,
                          seeds=seeds, output_dir=args.out)
    try:
        paths = run_experiment(spec)
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(p)
    return EXIT_OK


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "simulate":
            return _run_single(parser, args, "gd")
        if args.command == "population":
            return _run_single(parser, args, "population")
        if args.command == "bundle":
            return _run_single(parser, args, "bundle")
        if args.command == "verify":
            return _run_verify(args)
        if args.command == "figure":
            return _run_figure(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    parser.error(f"unknown command {args.command!r}")
    return EXIT_USAGE


def main() -> None:
    raise SystemExit(cli_main())
