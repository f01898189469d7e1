"""Experiment orchestration: lambda sweeps, repeated trials, export.

Performance is summarized per (problem, lambda) cell by the number of
successful trials and, over the successful trials only, the mean and
interquartile range of the evaluation counts. The best cell maximizes the
success count, breaking ties by the smaller mean evaluation count.

Per-trial seeds are derived deterministically from (base seed, problem
name, lambda, trial index) via SHA-256, so any trial can be rerun in
isolation from its row in the exported CSV. The algorithm variant is
deliberately not part of the derivation: variants compared on the same
(problem, lambda, trial) share initial means and sampling streams.

Exports: ``trials.csv`` (one row per trial, floats with 17 significant
digits), ``summary.json`` (per-cell summaries plus the selected best cell)
and, when tracing, one ``trace_*.csv`` per trial with per-generation rows.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .benchmarks import make_problem
from .optimizer import OptimizerConfig, RunResult, run

__all__ = [
    "CellSummary",
    "ExperimentResult",
    "ExperimentSpec",
    "TrialRow",
    "derive_trial_seed",
    "export_results",
    "iqr",
    "run_experiment",
    "run_trial",
    "summarize_rows",
]

DEFAULT_LAMBDAS = tuple(range(6, 31, 2))

TRIAL_FIELDS = (
    "function",
    "N",
    "variant",
    "lambda",
    "trial",
    "seed",
    "success",
    "evals",
    "best_f",
    "reason",
)


@dataclass(frozen=True)
class ExperimentSpec:
    function: str
    n: int
    variant: str
    lambdas: tuple[int, ...] = DEFAULT_LAMBDAS
    trials: int = 100
    seed: int = 1
    sigma0: float = 1.0
    alpha: Optional[float] = None
    trace: bool = False
    out_dir: Optional[Path] = None
    jobs: int = 1
    profile: str = "adaptive"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.lambdas:
            raise ValueError("lambda list must be non-empty")
        if any(l % 2 != 0 or l < 2 for l in self.lambdas):
            raise ValueError(f"all lambda values must be even, got {self.lambdas}")


@dataclass(frozen=True)
class TrialRow:
    function: str
    n: int
    variant: str
    lam: int
    trial: int
    seed: int
    success: bool
    evals: int
    best_f: float
    reason: str


@dataclass(frozen=True)
class CellSummary:
    lam: int
    n_success: int
    n_trials: int
    mean_evals: Optional[float]  # successful trials only; None if none
    iqr_evals: Optional[float]

    def sort_key(self) -> tuple:
        # maximize successes, then minimize mean evaluations
        mean = self.mean_evals if self.mean_evals is not None else math.inf
        return (-self.n_success, mean, self.lam)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list[TrialRow]
    cells: list[CellSummary]
    best: CellSummary
    traces: dict[tuple[int, int], list] = field(default_factory=dict)


def derive_trial_seed(base_seed: int, function: str, lam: int, trial: int) -> int:
    """Stable 64-bit trial seed from (base seed, problem, lambda, trial)."""
    key = f"{base_seed}|{function}|{lam}|{trial}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def iqr(values: Sequence[float]) -> float:
    """Interquartile range with linearly interpolated quartiles."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("iqr of an empty sample")
    q25, q75 = np.percentile(arr, [25.0, 75.0], method="linear")
    return float(q75 - q25)


def run_trial(
    function: str,
    n: int,
    variant: str,
    lam: int,
    seed: int,
    sigma0: float = 1.0,
    alpha: Optional[float] = None,
    trace: bool = False,
    profile: str = "adaptive",
) -> RunResult:
    """One optimizer run, fully determined by the derived integer seed."""
    problem = make_problem(function, n)
    config = OptimizerConfig(
        variant=variant,
        lam=lam,
        sigma0=sigma0,
        alpha=alpha,
        seed=seed,
        trace=trace,
        profile=profile,
    )
    return run(problem, config)


def _trial_task(args) -> tuple[int, int, TrialRow, Optional[list]]:
    spec, lam, trial = args
    seed = derive_trial_seed(spec.seed, spec.function, lam, trial)
    result = run_trial(
        spec.function,
        spec.n,
        spec.variant,
        lam,
        seed,
        sigma0=spec.sigma0,
        alpha=spec.alpha,
        trace=spec.trace,
        profile=spec.profile,
    )
    row = TrialRow(
        function=spec.function,
        n=spec.n,
        variant=spec.variant,
        lam=lam,
        trial=trial,
        seed=seed,
        success=result.success,
        evals=result.evaluations_used,
        best_f=result.best_f,
        reason=result.terminated_as.value,
    )
    return lam, trial, row, (result.trace if spec.trace else None)


def summarize_rows(rows: Iterable[TrialRow]) -> tuple[list[CellSummary], CellSummary]:
    """Recompute per-lambda summaries and the best cell from trial rows."""
    by_lam: dict[int, list[TrialRow]] = {}
    for row in rows:
        by_lam.setdefault(row.lam, []).append(row)
    cells = []
    for lam in sorted(by_lam):
        cell_rows = by_lam[lam]
        evals = [r.evals for r in cell_rows if r.success]
        cells.append(
            CellSummary(
                lam=lam,
                n_success=len(evals),
                n_trials=len(cell_rows),
                mean_evals=float(np.mean(evals)) if evals else None,
                iqr_evals=iqr(evals) if evals else None,
            )
        )
    if not cells:
        raise ValueError("no trial rows to summarize")
    best = min(cells, key=CellSummary.sort_key)
    return cells, best


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run trials x lambda cells, in parallel when ``spec.jobs > 1``.

    Output is collected and sorted by (lambda, trial) before summarizing,
    so it does not depend on worker scheduling.
    """
    tasks = [(spec, lam, trial) for lam in spec.lambdas for trial in range(spec.trials)]
    outputs = []
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            outputs = list(pool.map(_trial_task, tasks, chunksize=1))
    else:
        outputs = [_trial_task(t) for t in tasks]
    outputs.sort(key=lambda item: (item[0], item[1]))
    rows = [row for _, _, row, _ in outputs]
    traces = {
        (lam, trial): tr for lam, trial, _, tr in outputs if tr is not None
    }
    cells, best = summarize_rows(rows)
    return ExperimentResult(spec=spec, rows=rows, cells=cells, best=best, traces=traces)


# -- export -----------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_trials_csv(rows: Sequence[TrialRow], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIAL_FIELDS)
        for r in rows:
            writer.writerow(
                [
                    r.function,
                    r.n,
                    r.variant,
                    r.lam,
                    r.trial,
                    r.seed,
                    _fmt(r.success),
                    r.evals,
                    _fmt(r.best_f),
                    r.reason,
                ]
            )


def read_trials_csv(path: Path) -> list[TrialRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                TrialRow(
                    function=rec["function"],
                    n=int(rec["N"]),
                    variant=rec["variant"],
                    lam=int(rec["lambda"]),
                    trial=int(rec["trial"]),
                    seed=int(rec["seed"]),
                    success=rec["success"] == "1",
                    evals=int(rec["evals"]),
                    best_f=float(rec["best_f"]),
                    reason=rec["reason"],
                )
            )
    return rows


def _summary_payload(result: ExperimentResult) -> dict:
    def cell_dict(c: CellSummary) -> dict:
        return {
            "lambda": c.lam,
            "n_success": c.n_success,
            "n_trials": c.n_trials,
            "mean_evals": c.mean_evals,
            "iqr_evals": c.iqr_evals,
        }

    spec = asdict(result.spec)
    spec["out_dir"] = str(spec["out_dir"]) if spec["out_dir"] else None
    return {
        "spec": spec,
        "iqr_convention": "linear interpolation of quartiles on sorted evals",
        "cells": [cell_dict(c) for c in result.cells],
        "best": cell_dict(result.best),
    }


def write_trace_csv(trace, path: Path) -> None:
    if not trace:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerow(["g", "evals", "sigma", "p_norm", "best_f", "leaps"])
        return
    n = trace[0].mean.shape[0]
    header = (
        ["g", "evals", "sigma", "p_norm", "best_f"]
        + [f"m_{j}" for j in range(n)]
        + [f"scale_{j}" for j in range(n)]
        + ["n_leaps", "leaps"]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in trace:
            leaps = ";".join(f"{d.dim}:{d.kind.value}" for d in rec.leaps)
            writer.writerow(
                [rec.g, rec.evaluations, _fmt(rec.sigma), _fmt(rec.p_norm),
                 _fmt(rec.best_f_so_far)]
                + [_fmt(float(v)) for v in rec.mean]
                + [_fmt(float(v)) for v in rec.scales]
                + [len(rec.leaps), leaps]
            )


def export_results(result: ExperimentResult, out_dir: Path) -> dict[str, Path]:
    """Write trials.csv, summary.json and any trace files under ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {"trials": out_dir / "trials.csv", "summary": out_dir / "summary.json"}
        write_trials_csv(result.rows, paths["trials"])
        with open(paths["summary"], "w", encoding="utf-8") as fh:
            json.dump(_summary_payload(result), fh, indent=2)
            fh.write("\n")
        if result.traces:
            trace_dir = out_dir / "traces"
            trace_dir.mkdir(exist_ok=True)
            for (lam, trial), trace in sorted(result.traces.items()):
                name = f"trace_{result.spec.function}_lam{lam}_trial{trial}.csv"
                write_trace_csv(trace, trace_dir / name)
            paths["traces"] = trace_dir
        return paths
    except OSError as exc:
        raise OSError(f"cannot write results under {out_dir}: {exc}") from exc
