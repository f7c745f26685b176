"""Statistical error budget of the randomized-measurement estimators.

The single-shot variance of the subsystem estimator is fixed by the form
factors of all subsystems B of A:

    Var[K_A_hat] = (2**-N_A * sum_B K_B - K_A**2) / M = sigma_A**2 / M.

From it follow the relative error sigma_A / (K_A sqrt(M)), the rescaled
variance V_A = sigma_A**2 / K_A**2 and the Chebyshev run budget
M >= V_A / (delta eps**2).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rmt
from .protocol import _as_shotset, single_shot_values
from .spectral import SubsystemMask, _as_mask

__all__ = [
    "VarianceReport", "BudgetReport", "psff_variance", "rescaled_variance", "subset_form_factors",
    "snr_slope", "paired_snr_slope", "measurement_budget", "cue_dip_vtilde", "rmt_rescaled_variance",
    "empirical_variance", "jackknife_stderr",
]


@dataclass(frozen=True)
class VarianceReport:
    """Variance of an M-shot estimate and the derived per-shot spread."""

    variance: float
    sigma_A: float
    relative_error: float
    M: int
    mask: SubsystemMask
    K_A: float = None

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError(f"negative variance {self.variance}")


@dataclass(frozen=True)
class BudgetReport:
    M_required: int
    epsilon: float
    delta: float
    V_tilde: float

    def __post_init__(self):
        if self.M_required < 1:
            raise ValueError("M_required must be >= 1")


def _relative(sigma, k_a, m):
    if k_a == 0:
        return math.inf if sigma > 0 else 0.0
    return abs(sigma / (k_a * math.sqrt(m)))


def _subset_sum(k_by_subset, mask):
    table = {}
    for key, val in k_by_subset.items():
        table[_as_mask(key, mask.n_sites)] = float(val)
    total = 0.0
    for sub in mask.subsets():
        if sub not in table:
            raise KeyError(f"missing form factor for subsystem {sub}")
        total += table[sub]
    empty = SubsystemMask.empty(mask.n_sites)
    if abs(table[empty] - 1.0) > 1e-9:
        raise ValueError(f"the empty subsystem must have form factor 1, got {table[empty]}")
    return total, table[mask]


def psff_variance(k_by_subset, mask, M=1):
    """Variance of the M-shot estimate of K_A from the subsystem form factors.

    ``k_by_subset`` maps every B contained in ``mask`` (as masks or
    bitstrings) to K_B.
    """
    mask = _as_mask(mask)
    if M < 1:
        raise ValueError("M must be >= 1")
    total, k_a = _subset_sum(k_by_subset, mask)
    per_shot = max(total / 2 ** mask.n_a - k_a ** 2, 0.0)
    sigma = math.sqrt(per_shot)
    return VarianceReport(per_shot / M, sigma, _relative(sigma, k_a, M), int(M), mask, k_a)


def rescaled_variance(k_by_subset, mask):
    rep = psff_variance(k_by_subset, mask, 1)
    return rep.sigma_A ** 2 / rep.K_A ** 2


def subset_form_factors(k_of, mask, cache=None):
    """Evaluate ``k_of(B)`` for every B in ``mask``, memoized in ``cache``."""
    mask = _as_mask(mask)
    cache = {} if cache is None else cache
    out = {}
    for sub in mask.subsets():
        if sub not in cache:
            cache[sub] = 1.0 if sub.n_a == 0 else float(k_of(sub))
        out[sub] = cache[sub]
    return out


def snr_slope(k_t1, k_t2, sigma_t1, sigma_t2, M, t1, t2):
    """sqrt(M) (K(t2) - K(t1)) / (sigma(t2) + sigma(t1)) for independent datasets."""
    if not t2 > t1:
        raise ValueError("need t2 > t1")
    den = sigma_t1 + sigma_t2
    if den == 0:
        raise ZeroDivisionError("both standard deviations vanish")
    return math.sqrt(M) * (k_t2 - k_t1) / den


def paired_snr_slope(values_t1, values_t2):
    """Slope SNR when both times come from the same runs, paired by run.

    The error is the standard error of the paired difference, which keeps
    any correlation between the two times.
    """
    d = np.asarray(values_t2, dtype=float) - np.asarray(values_t1, dtype=float)
    if d.size < 2:
        raise ValueError("need at least two paired runs")
    err = d.std(ddof=1) / math.sqrt(d.size)
    if err == 0:
        raise ZeroDivisionError("paired differences have zero spread")
    return float(d.mean() / err)


def measurement_budget(V_tilde, epsilon, delta):
    """Smallest M with M >= V_tilde / (delta epsilon**2)."""
    if V_tilde < 0 or not epsilon > 0 or not 0 < delta <= 1:
        raise ValueError("need V_tilde >= 0, epsilon > 0 and 0 < delta <= 1")
    x = V_tilde / (delta * epsilon ** 2)
    near = round(x)
    # 99 / (0.1 * 0.1**2) lands a few ulps above 99000
    m = near if abs(x - near) <= 1e-9 * max(1.0, x) else math.ceil(x)
    return BudgetReport(max(1, int(m)), float(epsilon), float(delta), float(V_tilde))


def cue_dip_vtilde(n_a):
    """Closed-form rescaled variance after one CUE period."""
    if n_a < 0:
        raise ValueError("n_a must be >= 0")
    return 10.0 ** n_a - 1.0


def rmt_rescaled_variance(kind, n_sites, mask, t, tau=1.0):
    """Rescaled variance from the analytic ensemble form factors of every B in A."""
    mask = _as_mask(mask, n_sites)
    params = rmt.AnalyticParams.default(kind, 2 ** n_sites, tau)
    ks = subset_form_factors(
        lambda b: rmt.psff_analytic(kind, params, b.d_a, b.d_b, t), mask)
    return rescaled_variance(ks, mask)


def empirical_variance(shots, mask):
    """Unbiased sample variance of the single-shot values for ``mask``."""
    shots = _as_shotset(shots)
    mask = _as_mask(mask, shots.n_sites)
    vals = single_shot_values(shots.bits, mask)
    m = vals.size
    if m < 2:
        raise ValueError("need at least two shots")
    s2 = float(vals.var(ddof=1))
    k = float(vals.mean())
    sigma = math.sqrt(s2)
    return VarianceReport(s2 / m, sigma, _relative(sigma, k, m), int(m), mask, k)


def jackknife_stderr(values, statistic=np.mean, n_blocks=None):
    """Delete-one-block jackknife error of ``statistic`` over the leading axis.

    For the plain mean with one block per shot it equals the usual
    standard error s / sqrt(M).
    """
    values = np.asarray(values, dtype=float)
    m = values.shape[0]
    n_blocks = m if n_blocks is None else int(n_blocks)
    if not 2 <= n_blocks <= m:
        raise ValueError("need 2 <= n_blocks <= number of values")
    edges = np.linspace(0, m, n_blocks + 1).astype(int)
    keep = np.ones(m, dtype=bool)
    loo = np.empty(n_blocks)
    if statistic is np.mean and values.ndim == 1:
        total = values.sum()
        sizes = np.diff(edges)
        sums = np.add.reduceat(values, edges[:-1])
        loo = (total - sums) / (m - sizes)
    else:
        for b in range(n_blocks):
            keep[:] = True
            keep[edges[b]:edges[b + 1]] = False
            loo[b] = statistic(values[keep])
    return float(math.sqrt((n_blocks - 1) / n_blocks * np.sum((loo - loo.mean()) ** 2)))
