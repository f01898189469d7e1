"""Mixed-integer benchmark objectives, domains and initialization rules.

Points are laid out as x = [x_co, x_int]: the continuous variables first,
the integer variables last, with N_co = N_int = N/2. All four objectives
are nonnegative and reach 0 exactly at their optimum.

Stable CLI identifiers: ``nint-tablet``, ``reversed-ellipsoid-int``,
``ellipsoid-int``, ``sphere-onemax``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .integer_domain import IntegerDomain, build_domain

__all__ = [
    "BenchmarkProblem",
    "PROBLEM_NAMES",
    "ellipsoid_int",
    "make_problem",
    "nint_tablet",
    "reversed_ellipsoid_int",
    "sphere_one_max",
]


def _split(x_bar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x_bar = np.atleast_2d(np.asarray(x_bar, dtype=float))
    n = x_bar.shape[1]
    if n % 2 != 0:
        raise ValueError(f"dimension must be even, got {n}")
    half = n // 2
    return x_bar[:, :half], x_bar[:, half:]


def _scalar_or_vector(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


def nint_tablet(x_bar: np.ndarray):
    """sum(x_int^2) + sum((100 x_co)^2); continuous variables dominate."""
    single = np.asarray(x_bar).ndim == 1
    co, it = _split(x_bar)
    return _scalar_or_vector((it**2).sum(axis=1) + ((100.0 * co) ** 2).sum(axis=1), single)


def reversed_ellipsoid_int(x_bar: np.ndarray):
    """Ellipsoid with the small coefficients on the integer variables."""
    single = np.asarray(x_bar).ndim == 1
    co, it = _split(x_bar)
    n = co.shape[1] + it.shape[1]
    n_int = it.shape[1]
    j_int = np.arange(1, n_int + 1, dtype=float)
    j_co = np.arange(1, co.shape[1] + 1, dtype=float)
    c_int = 1000.0 ** ((j_int - 1.0) / (n - 1.0))
    c_co = 1000.0 ** ((n_int + j_co - 1.0) / (n - 1.0))
    val = ((c_int * it) ** 2).sum(axis=1) + ((c_co * co) ** 2).sum(axis=1)
    return _scalar_or_vector(val, single)


def ellipsoid_int(x_bar: np.ndarray):
    """Ellipsoid over the full vector; integer variables dominate."""
    arr = np.atleast_2d(np.asarray(x_bar, dtype=float))
    single = np.asarray(x_bar).ndim == 1
    n = arr.shape[1]
    j = np.arange(1, n + 1, dtype=float)
    coeff = 1000.0 ** ((j - 1.0) / (n - 1.0))
    return _scalar_or_vector(((coeff * arr) ** 2).sum(axis=1), single)


def sphere_one_max(x_bar: np.ndarray):
    """sum(x_co^2) + N_int - sum(x_int) over binary integer variables."""
    single = np.asarray(x_bar).ndim == 1
    co, it = _split(x_bar)
    val = (co**2).sum(axis=1) + it.shape[1] - it.sum(axis=1)
    return _scalar_or_vector(val, single)


@dataclass(frozen=True)
class BenchmarkProblem:
    """A benchmark objective bound to its domain and initialization rule."""

    name: str
    n: int
    n_co: int
    n_int: int
    domain: IntegerDomain
    objective: Callable
    optimum: np.ndarray
    optimum_value: float = 0.0
    binary: bool = field(default=False)  # 0-1 problem: integer m0 entries 0.5

    def evaluate(self, x_bar: np.ndarray) -> float:
        return float(self.objective(np.asarray(x_bar, dtype=float)))

    def evaluate_batch(self, x_bar: np.ndarray) -> np.ndarray:
        return np.asarray(self.objective(np.atleast_2d(x_bar)), dtype=float)

    def initial_mean(self, rng: np.random.Generator) -> np.ndarray:
        """Initial mean: integer entries 0.5 on 0-1 problems, otherwise
        (and for all continuous entries) uniform on [1, 3]."""
        if self.binary:
            m0 = np.empty(self.n)
            m0[: self.n_co] = rng.uniform(1.0, 3.0, self.n_co)
            m0[self.n_co :] = 0.5
            return m0
        return rng.uniform(1.0, 3.0, self.n)


_WIDE_RANGE = [float(v) for v in range(-10, 11)]

_REGISTRY = {
    "nint-tablet": (nint_tablet, _WIDE_RANGE, False),
    "reversed-ellipsoid-int": (reversed_ellipsoid_int, _WIDE_RANGE, False),
    "ellipsoid-int": (ellipsoid_int, _WIDE_RANGE, False),
    "sphere-onemax": (sphere_one_max, [0.0, 1.0], True),
}

PROBLEM_NAMES = tuple(_REGISTRY)


def make_problem(name: str, n: int) -> BenchmarkProblem:
    """Build a benchmark problem of even dimension ``n`` (N_co = N_int = n/2)."""
    if name not in _REGISTRY:
        raise ValueError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")
    if n < 2 or n % 2 != 0:
        raise ValueError(f"dimension must be even and >= 2, got {n}")
    objective, values, binary = _REGISTRY[name]
    n_int = n // 2
    domain = build_domain([values] * n_int)
    optimum = np.zeros(n)
    if binary:
        optimum[n - n_int :] = 1.0
    return BenchmarkProblem(
        name=name,
        n=n,
        n_co=n - n_int,
        n_int=n_int,
        domain=domain,
        objective=objective,
        optimum=optimum,
        binary=binary,
    )
