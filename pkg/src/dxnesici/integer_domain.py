"""Discrete-variable geometry: domains, thresholds, encoding and margins.

An :class:`IntegerDomain` holds, for each integer dimension, a strictly
increasing finite list of admissible values and the derived thresholds
(midpoints of adjacent values). The thresholds are the boundaries of the
plateaus that appear when the integer variables are relaxed to continuous
ones: the encoded value is constant between two thresholds.

All operations are pure functions of immutable inputs and safe for
concurrent use.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from . import _kernels

__all__ = [
    "IntegerDomain",
    "build_domain",
    "ci_halfwidth",
    "upper_quantile",
    "upper_tail",
]

_SQRT2 = math.sqrt(2.0)


def upper_quantile(alpha: float) -> float:
    """Standard-normal upper-tail quantile q with Pr(X > q) = alpha.

    Computed via the inverse normal CDF (``scipy.special.ndtri``), which is
    accurate to well below 1e-9 absolute error over (0, 1).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return float(-ndtri(alpha))


def upper_tail(t: float) -> float:
    """Standard-normal upper-tail mass Pr(X > t)."""
    return 0.5 * math.erfc(t / _SQRT2)


def ci_halfwidth(covariance_diag_jj: float, alpha: float) -> float:
    """Confidence-interval half-width q(alpha) * sqrt(variance).

    ``alpha`` is the one-sided tail mass and must lie in (0, 0.5) for the
    interval interpretation to hold.
    """
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must be in (0, 0.5), got {alpha}")
    if covariance_diag_jj < 0.0:
        raise ValueError(f"variance must be >= 0, got {covariance_diag_jj}")
    return upper_quantile(alpha) * math.sqrt(covariance_diag_jj)


class IntegerDomain:
    """Per-dimension sorted value sets and derived plateau thresholds.

    Use :func:`build_domain` (or the constructor) with one strictly
    increasing list of at least two values per integer dimension. A domain
    with zero integer dimensions is valid and makes every integer-specific
    operation vacuous.
    """

    __slots__ = (
        "values",
        "thresholds",
        "n_int",
        "_values_pad",
        "_thr_pad",
        "_n_values",
        "_n_thr",
    )

    def __init__(self, value_lists: Sequence[Sequence[float]]):
        values = []
        thresholds = []
        for j, row in enumerate(value_lists):
            arr = np.asarray(row, dtype=float)
            if arr.ndim != 1 or arr.size < 2:
                raise ValueError(
                    f"integer dimension {j}: need at least 2 values, got {arr.size}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"integer dimension {j}: values must be finite")
            if not np.all(np.diff(arr) > 0):
                raise ValueError(
                    f"integer dimension {j}: values must be strictly increasing "
                    "(duplicates are rejected)"
                )
            values.append(arr)
            thresholds.append((arr[1:] + arr[:-1]) / 2.0)
        self.values: tuple[np.ndarray, ...] = tuple(values)
        self.thresholds: tuple[np.ndarray, ...] = tuple(thresholds)
        self.n_int: int = len(values)

        # padded rectangular copies for the kernels (padding repeats the
        # last entry, which keeps searchsorted counts correct after capping)
        kmax = max((v.size for v in values), default=2)
        self._values_pad = np.empty((self.n_int, kmax))
        self._thr_pad = np.empty((self.n_int, kmax - 1))
        self._n_values = np.empty(self.n_int, dtype=np.int64)
        self._n_thr = np.empty(self.n_int, dtype=np.int64)
        for j, (v, t) in enumerate(zip(values, thresholds)):
            self._values_pad[j, : v.size] = v
            self._values_pad[j, v.size :] = v[-1]
            self._thr_pad[j, : t.size] = t
            self._thr_pad[j, t.size :] = t[-1]
            self._n_values[j] = v.size
            self._n_thr[j] = t.size

    def __repr__(self) -> str:
        return f"IntegerDomain(n_int={self.n_int})"

    # -- encoding ----------------------------------------------------------

    def encode(self, x: np.ndarray, n_co: int) -> np.ndarray:
        """Map continuous points to the mixed-integer space.

        Continuous entries (the first ``n_co``) pass through unchanged;
        integer entries snap to the domain value whose plateau contains
        them, with plateaus half-open on the left: value k covers
        (thr[k-1], thr[k]].

        Accepts a single point of length ``n_co + n_int`` or a batch with
        that many columns. Non-finite inputs are rejected.
        """
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        batch = np.atleast_2d(arr)
        if batch.shape[1] != n_co + self.n_int:
            raise ValueError(
                f"point has {batch.shape[1]} entries, expected {n_co + self.n_int}"
            )
        if not np.all(np.isfinite(batch)):
            raise ValueError("encode requires finite inputs")
        out = np.empty_like(batch)
        _kernels.encode_into(
            np.ascontiguousarray(batch),
            n_co,
            self._values_pad,
            self._thr_pad,
            self._n_values,
            out,
        )
        return out[0] if single else out

    # -- threshold queries ---------------------------------------------------

    def ell_low(self, m_j: float, j: int) -> Optional[float]:
        """Largest threshold strictly below ``m_j``, or None."""
        thr = self.thresholds[j]
        k = int(np.searchsorted(thr, m_j, side="left")) - 1
        return float(thr[k]) if k >= 0 else None

    def ell_up(self, m_j: float, j: int) -> Optional[float]:
        """Smallest threshold >= ``m_j``, or None."""
        thr = self.thresholds[j]
        k = int(np.searchsorted(thr, m_j, side="left"))
        return float(thr[k]) if k < thr.size else None

    def ell_close(self, m_j: float, j: int) -> float:
        """Threshold closest to ``m_j``; ties break toward the lower one."""
        return float(
            _kernels.closest_threshold(m_j, self._thr_pad[j], self._n_thr[j])
        )

    # -- margins --------------------------------------------------------------

    def resolution(
        self, m_j: float, covariance_diag_jj: float, alpha: float, j: int
    ) -> int:
        """Number of thresholds within the closed interval m_j +- CI."""
        ci = ci_halfwidth(covariance_diag_jj, alpha)
        return int(
            _kernels.count_in_interval(
                self._thr_pad[j], self._n_thr[j], m_j - ci, m_j + ci
            )
        )

    def tail_probabilities(
        self, m_j: float, covariance_diag_jj: float, j: int
    ) -> tuple[Optional[float], Optional[float]]:
        """Gaussian tail masses beyond the bracketing thresholds.

        Returns ``(lower, upper)`` where lower = Pr(x <= ell_low) and
        upper = Pr(x > ell_up) under N(m_j, covariance_diag_jj); an entry is
        None where the corresponding threshold does not exist. Diagnostic
        use only.
        """
        if covariance_diag_jj <= 0.0:
            raise ValueError("variance must be positive")
        s = math.sqrt(covariance_diag_jj)
        low = self.ell_low(m_j, j)
        up = self.ell_up(m_j, j)
        lower = upper_tail((m_j - low) / s) if low is not None else None
        upper = upper_tail((up - m_j) / s) if up is not None else None
        return lower, upper


def build_domain(value_lists: Sequence[Sequence[float]]) -> IntegerDomain:
    """Build an :class:`IntegerDomain` from per-dimension value lists."""
    return IntegerDomain(value_lists)
