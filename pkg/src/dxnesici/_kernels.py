"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is picked once at import time from the ``DXNESICI_BACKEND``
environment variable:

* ``auto`` (default) -- numba if importable, else numpy;
* ``numba``          -- require numba, raise if missing;
* ``numpy``          -- force the pure-numpy implementations.

Both flavours are built from the same source bodies, so they compute the
same thing; ``BACKENDS`` maps backend name to a namespace holding the full
kernel set and the module-level names are bound to the active backend.
``benchmarks/backend_bench.py`` times the two sets against each other.

Kernels are deterministic, run in float64, and the compiled variants use
``cache=True`` without ``fastmath`` so results are reproducible run to run.
(The two backends may still differ in the last bit of ``exp``/``sqrt``
calls; determinism guarantees hold per backend.)
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

__all__ = ["BACKEND", "BACKENDS", "NUMBA_AVAILABLE"]


def _build(decorate) -> SimpleNamespace:
    """Instantiate the kernel set under a decorator (njit or identity)."""

    @decorate
    def closest_threshold(v, row, nt):
        # Threshold minimizing |l - v|; ties resolved toward the lower one.
        up = np.searchsorted(row[:nt], v, side="left")
        if up >= nt:
            return row[nt - 1]
        if up == 0:
            return row[0]
        low = row[up - 1]
        high = row[up]
        if v - low <= high - v:
            return low
        return high

    @decorate
    def count_in_interval(row, nt, lo_edge, hi_edge):
        # Thresholds l with lo_edge <= l <= hi_edge (closed interval).
        hi = np.searchsorted(row, hi_edge, side="right")
        if hi > nt:
            hi = nt
        lo = np.searchsorted(row, lo_edge, side="left")
        if lo > nt:
            lo = nt
        return hi - lo

    @decorate
    def encode_into(x, n_co, values_pad, thr_pad, n_values, out):
        # Snap integer coordinates (columns n_co..N-1) to domain values.
        # Value k is chosen when thr[k-1] < x <= thr[k]: the index is the
        # count of thresholds strictly below x, capped at K-1.
        lam = x.shape[0]
        n_int = values_pad.shape[0]
        for i in range(lam):
            for j in range(n_co):
                out[i, j] = x[i, j]
            for jj in range(n_int):
                col = n_co + jj
                k = np.searchsorted(thr_pad[jj], x[i, col], side="left")
                kmax = n_values[jj] - 1
                if k > kmax:
                    k = kmax
                out[i, col] = values_pad[jj, k]
        return out

    @decorate
    def resolution_counts(m_int, ci_int, thr_pad, n_thr, out):
        for jj in range(m_int.shape[0]):
            out[jj] = count_in_interval(
                thr_pad[jj], n_thr[jj], m_int[jj] - ci_int[jj], m_int[jj] + ci_int[jj]
            )
        return out

    @decorate
    def bias_eta(m_int, g_delta_int, cov_diag_int, q_alpha, thr_pad, n_thr, out):
        # Doubled mean learning rate where the integer dimension has
        # resolution <= 1 and the proposed move points away from the
        # closest threshold. Exact ties (sign 0) never trigger.
        for jj in range(m_int.shape[0]):
            out[jj] = 1.0
            row = thr_pad[jj]
            nt = n_thr[jj]
            ci = q_alpha * math.sqrt(cov_diag_int[jj])
            if count_in_interval(row, nt, m_int[jj] - ci, m_int[jj] + ci) > 1:
                continue
            away = m_int[jj] - closest_threshold(m_int[jj], row, nt)
            if g_delta_int[jj] * away > 0.0:
                out[jj] = 2.0
        return out

    @decorate
    def leap_correct(
        m_after_int,
        m_before_int,
        cov_diag_int,
        q_alpha,
        thr_pad,
        n_thr,
        kinds,
        new_vals,
    ):
        # Relocate means of integer dimensions whose resolution is 0.
        # kinds: 0 none, 1 correction, 2 leap toward lower, 3 toward upper.
        for jj in range(m_after_int.shape[0]):
            kinds[jj] = 0
            new_vals[jj] = m_after_int[jj]
            row = thr_pad[jj]
            nt = n_thr[jj]
            v = m_after_int[jj]
            ci = q_alpha * math.sqrt(cov_diag_int[jj])
            if count_in_interval(row, nt, v - ci, v + ci) != 0:
                continue
            if v <= row[0] or v > row[nt - 1]:
                close = closest_threshold(v, row, nt)
                s = 0.0
                if v > close:
                    s = 1.0
                elif v < close:
                    s = -1.0
                new_vals[jj] = close + s * ci
                kinds[jj] = 1
            elif v <= closest_threshold(m_before_int[jj], row, nt):
                up = np.searchsorted(row[:nt], v, side="left")
                new_vals[jj] = row[up - 1] + ci
                kinds[jj] = 2
            else:
                up = np.searchsorted(row[:nt], v, side="left")
                new_vals[jj] = row[up] - ci
                kinds[jj] = 3
        return kinds, new_vals

    @decorate
    def distance_weights(z_sorted, w_hat, alpha_dist, out):
        # Rank weights amplified by the draw's distance from the mean,
        # then recentred so the weights sum to zero.
        lam = z_sorted.shape[0]
        n = z_sorted.shape[1]
        total = 0.0
        for i in range(lam):
            s = 0.0
            for j in range(n):
                s += z_sorted[i, j] * z_sorted[i, j]
            out[i] = w_hat[i] * math.exp(alpha_dist * math.sqrt(s))
            total += out[i]
        for i in range(lam):
            out[i] = out[i] / total - 1.0 / lam
        return out

    @decorate
    def weighted_gradients(z_sorted, w):
        # G_M = sum_i w_i (z_i z_i^T - I); split into scale and shape parts.
        lam, n = z_sorted.shape
        zt = np.ascontiguousarray(z_sorted.T)
        g_m = zt @ (w.reshape(lam, 1) * z_sorted)
        g_m = 0.5 * (g_m + g_m.T)
        w_sum = 0.0
        for i in range(lam):
            w_sum += w[i]
        tr = 0.0
        for j in range(n):
            g_m[j, j] -= w_sum
            tr += g_m[j, j]
        g_sigma = tr / n
        g_b = g_m.copy()
        for j in range(n):
            g_b[j, j] -= g_sigma
        g_delta = zt @ w
        return g_m, g_sigma, g_b, g_delta

    return SimpleNamespace(
        closest_threshold=closest_threshold,
        count_in_interval=count_in_interval,
        encode_into=encode_into,
        resolution_counts=resolution_counts,
        bias_eta=bias_eta,
        leap_correct=leap_correct,
        distance_weights=distance_weights,
        weighted_gradients=weighted_gradients,
    )


def _vectorized_encode_into(x, n_co, values_pad, thr_pad, n_values, out):
    # numpy override of encode_into: batch searchsorted per dimension
    out[:, :n_co] = x[:, :n_co]
    for jj in range(values_pad.shape[0]):
        col = n_co + jj
        idx = np.searchsorted(thr_pad[jj], x[:, col], side="left")
        np.minimum(idx, n_values[jj] - 1, out=idx)
        out[:, col] = values_pad[jj, idx]
    return out


def _vectorized_distance_weights(z_sorted, w_hat, alpha_dist, out):
    norms = np.sqrt(np.einsum("ij,ij->i", z_sorted, z_sorted))
    np.multiply(w_hat, np.exp(alpha_dist * norms), out=out)
    out /= out.sum()
    out -= 1.0 / z_sorted.shape[0]
    return out


def _vectorized_weighted_gradients(z_sorted, w):
    lam, n = z_sorted.shape
    g_m = z_sorted.T @ (w[:, None] * z_sorted)
    g_m = 0.5 * (g_m + g_m.T)
    g_m[np.diag_indices(n)] -= w.sum()
    g_sigma = np.trace(g_m) / n
    g_b = g_m.copy()
    g_b[np.diag_indices(n)] -= g_sigma
    return g_m, g_sigma, g_b, w @ z_sorted


def _resolve() -> tuple[str, dict[str, SimpleNamespace]]:
    choice = os.environ.get("DXNESICI_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"DXNESICI_BACKEND must be 'auto', 'numba' or 'numpy', got {choice!r}"
        )
    numpy_ns = _build(lambda f: f)
    numpy_ns.name = "numpy"
    numpy_ns.encode_into = _vectorized_encode_into
    numpy_ns.distance_weights = _vectorized_distance_weights
    numpy_ns.weighted_gradients = _vectorized_weighted_gradients
    backends = {"numpy": numpy_ns}
    if choice in ("auto", "numba"):
        try:
            from numba import njit
        except ImportError:
            if choice == "numba":
                raise ImportError(
                    "DXNESICI_BACKEND=numba but numba is not installed"
                ) from None
        else:
            numba_ns = _build(njit(cache=True))
            numba_ns.name = "numba"
            backends["numba"] = numba_ns
    active = "numba" if ("numba" in backends and choice != "numpy") else "numpy"
    return active, backends


BACKEND, BACKENDS = _resolve()
NUMBA_AVAILABLE = "numba" in BACKENDS

_active = BACKENDS[BACKEND]
closest_threshold = _active.closest_threshold
count_in_interval = _active.count_in_interval
encode_into = _active.encode_into
resolution_counts = _active.resolution_counts
bias_eta = _active.bias_eta
leap_correct = _active.leap_correct
distance_weights = _active.distance_weights
weighted_gradients = _active.weighted_gradients
