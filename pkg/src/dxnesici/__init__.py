"""DX-NES-ICI: a natural evolution strategy for mixed-integer black-box
optimization, its two ablation variants, and a benchmark harness."""

import os as _os

# The search-distribution matrices are tiny (N <= 80): multi-threaded BLAS
# only causes contention, especially under the trial-parallel harness.
# Effective only when this package is imported before numpy.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

from ._kernels import BACKEND
from .benchmarks import BenchmarkProblem, PROBLEM_NAMES, make_problem
from .engine import DistributionState, NaturalGradients, StrategyParams
from .harness import (
    CellSummary,
    ExperimentSpec,
    derive_trial_seed,
    export_results,
    run_experiment,
    run_trial,
)
from .integer_domain import IntegerDomain, build_domain, ci_halfwidth
from .mi_control import LeapDecision, LeapKind
from .optimizer import (
    OptimizerConfig,
    RunResult,
    TerminationReason,
    VARIANTS,
    run,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BenchmarkProblem",
    "CellSummary",
    "DistributionState",
    "ExperimentSpec",
    "IntegerDomain",
    "LeapDecision",
    "LeapKind",
    "NaturalGradients",
    "OptimizerConfig",
    "PROBLEM_NAMES",
    "RunResult",
    "StrategyParams",
    "TerminationReason",
    "VARIANTS",
    "build_domain",
    "ci_halfwidth",
    "derive_trial_seed",
    "export_results",
    "make_problem",
    "run",
    "run_experiment",
    "run_trial",
    "step",
]
