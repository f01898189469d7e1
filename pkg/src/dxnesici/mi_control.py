"""Mixed-integer control: mean-movement bias and leap/correction.

Both operations look at the resolution of an integer dimension -- the
number of plateau thresholds inside the mean-centered confidence interval
of half-width CI_j = q(alpha) sqrt(<Sigma>_j):

* the bias doubles the mean learning rate of converged integer dimensions
  (resolution <= 1) whose proposed move points away from the closest
  threshold, before the distribution update;
* the leap/correction relocates the mean of integer dimensions whose
  resolution dropped to 0 after the update, placing it at distance CI from
  the adjacent threshold so the marginal tail mass is exactly alpha.

Pure functions over the supplied state; safe for concurrent use across
independent runs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import _kernels
from .engine import DistributionState
from .integer_domain import IntegerDomain, upper_quantile

__all__ = ["LeapKind", "LeapDecision", "bias_mean_learning_rate", "leap_and_correct"]


class LeapKind(str, Enum):
    NONE = "none"
    CORRECTION = "correction"
    LEAP_LOW = "leap_low"
    LEAP_UP = "leap_up"


_KIND_CODES = {1: LeapKind.CORRECTION, 2: LeapKind.LEAP_LOW, 3: LeapKind.LEAP_UP}


@dataclass(frozen=True)
class LeapDecision:
    """Record of one relocated integer dimension (for trace output)."""

    dim: int  # global dimension index
    kind: LeapKind
    new_mean_j: float


def bias_mean_learning_rate(
    m_g: np.ndarray,
    g_delta: np.ndarray,
    covariance_diag: np.ndarray,
    alpha: float,
    domain: IntegerDomain,
) -> np.ndarray:
    """Per-dimension mean learning rate vector in {1, 2}.

    ``covariance_diag`` is the diagonal of sigma^2 B B^T of the current
    (pre-update) distribution. Continuous dimensions always get 1; an
    integer dimension gets 2 when its resolution is <= 1 and sign(G_delta_j)
    matches sign(m_j - ell_close(m_j)), exact ties never triggering.
    """
    n = m_g.shape[0]
    n_co = n - domain.n_int
    eta_m = np.ones(n)
    if domain.n_int == 0:
        return eta_m
    q = upper_quantile(alpha)
    _kernels.bias_eta(
        np.ascontiguousarray(m_g[n_co:]),
        np.ascontiguousarray(g_delta[n_co:]),
        np.ascontiguousarray(covariance_diag[n_co:]),
        q,
        domain._thr_pad,
        domain._n_thr,
        eta_m[n_co:],
    )
    return eta_m


def leap_and_correct(
    m_g: np.ndarray,
    state_after: DistributionState,
    alpha: float,
    domain: IntegerDomain,
) -> tuple[DistributionState, list[LeapDecision]]:
    """Relocate integer means whose post-update resolution is 0.

    ``m_g`` is the mean before the distribution update (its closest
    threshold decides the leap direction); ``state_after`` is the updated
    distribution including any expansion emphasis. Per integer dimension j
    with resolution 0 under the updated covariance:

    * beyond the outermost thresholds: mean correction against the closest
      threshold;
    * at or below the pre-update mean's closest threshold: leap to just
      above the next lower threshold;
    * otherwise: leap to just below the next upper threshold.

    The placed mean sits exactly CI away from the adjacent threshold.
    Dimensions with resolution >= 1 and continuous dimensions are untouched.
    """
    if domain.n_int == 0:
        return state_after, []
    n = m_g.shape[0]
    n_co = n - domain.n_int
    q = upper_quantile(alpha)
    kinds = np.empty(domain.n_int, dtype=np.int64)
    new_vals = np.empty(domain.n_int)
    cov_diag = state_after.covariance_diag()
    _kernels.leap_correct(
        np.ascontiguousarray(state_after.m[n_co:]),
        np.ascontiguousarray(m_g[n_co:]),
        np.ascontiguousarray(cov_diag[n_co:]),
        q,
        domain._thr_pad,
        domain._n_thr,
        kinds,
        new_vals,
    )
    if not np.any(kinds):
        return state_after, []
    m_new = state_after.m.copy()
    decisions = []
    for jj in np.nonzero(kinds)[0]:
        m_new[n_co + jj] = new_vals[jj]
        decisions.append(
            LeapDecision(
                dim=int(n_co + jj),
                kind=_KIND_CODES[int(kinds[jj])],
                new_mean_j=float(new_vals[jj]),
            )
        )
    return replace(state_after, m=m_new), decisions
