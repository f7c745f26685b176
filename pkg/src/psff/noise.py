"""Experimental imperfections: global depolarization and decorrelated unitaries."""

from dataclasses import dataclass

import numpy as np

from . import hilbert
from .protocol import (ShotRecord, _all_local_products, _bitstring, _dagger,
                       born_probabilities, sample_outcomes, single_shot_values)
from .spectral import _as_mask, _n_sites_of

__all__ = [
    "DepolarizationModel", "DecorrelationModel", "UnrecoverableNoiseError",
    "InvalidPurityError", "depolarized_psff", "purity_under_depolarization",
    "alpha_from_purity", "rescale_psff", "depolarize_state", "exact_depolarized_expectation",
    "sample_local_hermitian", "decorrelated_rotations", "decorrelated_shot",
]

MIN_ALPHA = 1e-6


class UnrecoverableNoiseError(ValueError):
    """Coherent weight too small to undo the depolarization."""


class InvalidPurityError(ValueError):
    """Purity below the maximally mixed value 1/D."""


@dataclass(frozen=True)
class DepolarizationModel:
    """Global depolarizing channel of strength p applied once per period."""

    p: float

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")

    def alpha(self, n):
        return (1.0 - self.p) ** np.asarray(n, dtype=float)


@dataclass(frozen=True)
class DecorrelationModel:
    """Final local rotations u_i^dagger exp(-i eta h_i) with h_i from a 2x2 GUE."""

    eta: float

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError("eta must be non-negative")


def depolarized_psff(k_a, alpha, d_a):
    return alpha * k_a + (1 - alpha) / d_a ** 2


def purity_under_depolarization(n, p, d):
    alpha = DepolarizationModel(p).alpha(n)
    return alpha ** 2 + (1 - alpha ** 2) / d


def alpha_from_purity(p_n, d):
    p_n = np.asarray(p_n, dtype=float)
    if np.any(p_n < 1.0 / d - 1e-12) or np.any(p_n > 1 + 1e-12):
        raise InvalidPurityError(f"purity {p_n} outside [1/D, 1]")
    out = np.sqrt(np.clip((d * p_n - 1) / (d - 1), 0.0, 1.0))
    return float(out) if out.ndim == 0 else out


def rescale_psff(k_dec, alpha, d_a):
    """Undo :func:`depolarized_psff`. Standard errors scale by 1/alpha."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < MIN_ALPHA):
        raise UnrecoverableNoiseError(f"alpha={alpha} below {MIN_ALPHA}")
    out = (np.asarray(k_dec) - (1 - alpha) / d_a ** 2) / alpha
    return float(out) if np.ndim(out) == 0 else out


def depolarize_state(rho, alpha):
    rho = np.asarray(rho)
    d = rho.shape[-1]
    return alpha * rho + (1 - alpha) * np.eye(d) / d


def exact_depolarized_expectation(v, n_periods, p, mask):
    """Clifford-exact protocol average with the channel applied after every period.

    Density-matrix oracle for N <= 3: each period evolves rho -> V rho V^dagger
    and then depolarizes with strength p.
    """
    v = np.asarray(v)
    n = _n_sites_of(v.shape[-1])
    if n > 3:
        raise ValueError("exact enumeration is limited to N <= 3")
    mask = _as_mask(mask, n)
    u = _all_local_products(n)
    psi = u[:, :, 0]
    rho = psi[:, :, None] * psi[:, None, :].conj()
    alpha = 1.0 - p
    for _ in range(int(n_periods)):
        rho = depolarize_state(v @ rho @ v.conj().T, alpha)
    rho = _dagger(u) @ rho @ u
    probs = np.real(np.diagonal(rho, axis1=1, axis2=2))
    vals = single_shot_values(np.arange(2 ** n), mask)
    return float(np.mean(probs @ vals))


def sample_local_hermitian(n_sites, rng, size=None):
    """2x2 GUE matrices with unit-variance off-diagonal entries."""
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (n_sites, 2, 2)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return (a + _dagger(a)) / 2


def decorrelated_rotations(unitaries, h, eta):
    """v_i = u_i^dagger exp(-i eta h_i); eta = 0 returns u_i^dagger exactly."""
    inv = _dagger(unitaries)
    if eta == 0:
        return inv
    return inv @ hilbert.expm_hermitian(h, eta)


def decorrelated_shot(t_op, local_unitaries, eta, rng, *, h_locals=None, noise_rng=None,
                      realization=0, time=0.0, master_seed=None):
    """One protocol run whose final rotation is decorrelated from the first.

    The Born draw consumes ``rng`` exactly like :func:`protocol.run_shot`, so
    eta = 0 reproduces the ideal shot bit for bit. The Hermitian generators
    come from ``h_locals`` or, failing that, from ``noise_rng``.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    hilbert.check_unitary(t_op)
    u = np.asarray(local_unitaries)
    n = u.shape[0]
    if eta > 0 and h_locals is None:
        if noise_rng is None:
            raise ValueError("need h_locals or noise_rng when eta > 0")
        h_locals = sample_local_hermitian(n, noise_rng)
    probs = born_probabilities(t_op, u, final=decorrelated_rotations(u, h_locals, eta))
    b = int(sample_outcomes(probs, rng.random()))
    return ShotRecord(realization, float(time), _bitstring(b, n), master_seed)
