"""Command line interface.

``dxnesici run``        sweep population sizes over repeated trials and
                        export per-trial rows plus per-cell summaries.
``dxnesici summarize``  recompute summaries from a previously exported
                        trials.csv.

Exit code 0 on completion, 1 on I/O errors, 2 on bad arguments.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .benchmarks import PROBLEM_NAMES
from .harness import (
    ExperimentSpec,
    _summary_payload,
    export_results,
    read_trials_csv,
    run_experiment,
    summarize_rows,
)
from .optimizer import VARIANTS

__all__ = ["main"]


def _parse_lambdas(text: str) -> tuple[int, ...]:
    if text.strip().lower() == "sweep":
        return tuple(range(6, 31, 2))
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"--lambda expects 'sweep' or a comma-separated list, got {text!r}"
        ) from None
    if not values:
        raise argparse.ArgumentTypeError("--lambda list is empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dxnesici",
        description="Mixed-integer evolution strategy benchmark runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run trials over one or more population sizes")
    runp.add_argument("--function", required=True, choices=PROBLEM_NAMES)
    runp.add_argument("--dim", required=True, type=int, help="problem dimension N")
    runp.add_argument("--algorithm", default="dxnesici", choices=VARIANTS)
    runp.add_argument(
        "--lambda",
        dest="lambdas",
        type=_parse_lambdas,
        default=tuple(range(6, 31, 2)),
        help="'sweep' for 6,8,...,30 or a comma-separated list of even sizes",
    )
    runp.add_argument("--trials", type=int, default=100)
    runp.add_argument("--seed", type=int, default=1)
    runp.add_argument("--sigma0", type=float, default=1.0)
    runp.add_argument("--alpha", type=float, default=None)
    runp.add_argument("--trace", action="store_true", help="export per-generation traces")
    runp.add_argument("--out", type=Path, default=None, help="output directory")
    runp.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    runp.add_argument(
        "--rates",
        dest="profile",
        choices=("adaptive", "fixed"),
        default="adaptive",
        help="learning-rate/weight profile",
    )

    sump = sub.add_parser("summarize", help="recompute summaries from trials.csv")
    sump.add_argument("csv", type=Path)
    return parser


def _cmd_run(args) -> int:
    spec = ExperimentSpec(
        function=args.function,
        n=args.dim,
        variant=args.algorithm,
        lambdas=args.lambdas,
        trials=args.trials,
        seed=args.seed,
        sigma0=args.sigma0,
        alpha=args.alpha,
        trace=args.trace,
        out_dir=args.out,
        jobs=args.jobs,
        profile=args.profile,
    )
    result = run_experiment(spec)
    payload = _summary_payload(result)
    if args.out is not None:
        try:
            paths = export_results(result, args.out)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        payload["files"] = {k: str(v) for k, v in paths.items()}
    json.dump(payload, sys.stdout, indent=2)
    print()
    return 0


def _cmd_summarize(args) -> int:
    try:
        rows = read_trials_csv(args.csv)
    except OSError as exc:
        print(f"error: cannot read {args.csv}: {exc}", file=sys.stderr)
        return 1
    if not rows:
        print(f"error: {args.csv} holds no trial rows", file=sys.stderr)
        return 1
    cells, best = summarize_rows(rows)
    payload = {
        "cells": [
            {
                "lambda": c.lam,
                "n_success": c.n_success,
                "n_trials": c.n_trials,
                "mean_evals": c.mean_evals,
                "iqr_evals": c.iqr_evals,
            }
            for c in cells
        ],
        "best": {
            "lambda": best.lam,
            "n_success": best.n_success,
            "n_trials": best.n_trials,
            "mean_evals": best.mean_evals,
            "iqr_evals": best.iqr_evals,
        },
    }
    json.dump(payload, sys.stdout, indent=2)
    print()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_summarize(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
