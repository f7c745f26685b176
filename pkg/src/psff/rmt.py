"""Wigner-Dyson ensembles and their closed-form (partial) spectral form factors.

Gaussian ensembles are normalized so that the semicircle has radius 2; the
centre density is then D/pi and the natural Heisenberg time is 2D. Circular
ensembles use a unit period, so their Heisenberg time is D.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import j1

__all__ = [
    "EnsembleKind", "AnalyticParams", "PsffCoeffs", "haar_unitary", "sample",
    "sff_analytic", "psff_coeffs", "pq_analytic", "psff_analytic",
]


class EnsembleKind(str, Enum):
    GUE = "GUE"
    GOE = "GOE"
    CUE = "CUE"
    COE = "COE"

    @property
    def symmetry_class(self):
        return "unitary" if self in (EnsembleKind.GUE, EnsembleKind.CUE) else "orthogonal"

    @property
    def beta(self):
        return 2 if self.symmetry_class == "unitary" else 1

    @property
    def is_circular(self):
        return self in (EnsembleKind.CUE, EnsembleKind.COE)


def _kind(kind):
    return EnsembleKind(str(kind.value if isinstance(kind, EnsembleKind) else kind).upper())


def _symmetry_class(cls):
    name = str(getattr(cls, "value", cls))
    if name.upper() in EnsembleKind.__members__:
        return EnsembleKind(name.upper()).symmetry_class
    if name.lower() in ("unitary", "orthogonal"):
        return name.lower()
    raise ValueError(f"unknown symmetry class {cls!r}")


@dataclass(frozen=True)
class AnalyticParams:
    """Dimension and Heisenberg time of an analytic curve.

    ``beta`` is 2 for the unitary and 1 for the orthogonal class.
    """

    dim: int
    heisenberg_time: float
    beta: int = 2

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not self.heisenberg_time > 0:
            raise ValueError("heisenberg_time must be positive")
        if self.beta not in (1, 2):
            raise ValueError("beta must be 1 or 2")

    @classmethod
    def default(cls, kind, dim, tau=1.0):
        kind = _kind(kind)
        t_h = dim * tau if kind.is_circular else 2.0 * dim
        return cls(dim, t_h, kind.beta)


@dataclass(frozen=True)
class PsffCoeffs:
    c1: float
    c2: float


def haar_unitary(dim, rng, size=None):
    """Haar-random unitary from the QR decomposition of a complex Ginibre matrix.

    The phases of R's diagonal are folded back into Q so the result is exactly
    Haar distributed. ``size`` adds leading batch axes.
    """
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (dim, dim)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


def sample(kind, dim, rng):
    """One draw from GUE, GOE, CUE or COE of dimension ``dim``."""
    kind = _kind(kind)
    if dim < 2:
        raise ValueError("dim must be at least 2")
    if kind is EnsembleKind.CUE:
        return haar_unitary(dim, rng)
    if kind is EnsembleKind.COE:
        u = haar_unitary(dim, rng)
        return u.T @ u
    scale = np.sqrt(2.0 / dim)
    if kind is EnsembleKind.GUE:
        a = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
        return scale * (a + a.conj().T) / 2
    a = rng.standard_normal((dim, dim))
    return scale * (a + a.T) / 2


def _bessel_term(t, dim, t_h):
    x = 4.0 * dim * t / t_h
    out = np.ones_like(x)
    small = x < 1e-6
    # J1(x) ~ x/2 - x^3/16, so r = 2 J1(x)/x -> 1 - x^2/8
    out[small] = 1.0 - x[small] ** 2 / 8.0
    xs = x[~small]
    out[~small] = 2.0 * j1(xs) / xs
    return out


def sff_analytic(kind, params, t):
    """Ensemble SFF for the given class. Scalar in, float out; array in, array out."""
    kind = _kind(kind)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    scalar = t_arr.ndim == 0
    tt = np.atleast_1d(t_arr)
    x = tt / params.heisenberg_time
    if kind.symmetry_class == "unitary":
        body = np.minimum(x, 1.0)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            early = 2 * x - x * np.log1p(2 * x)
            late = 2 - x * np.log((2 * x + 1) / (2 * x - 1))
        body = np.where(x <= 1.0, early, late)
    k = body / params.dim
    if kind.is_circular:
        k = np.where(tt == 0, 1.0, k)
    else:
        k = k + _bessel_term(tt, params.dim, params.heisenberg_time) ** 2
    return float(k[0]) if scalar else k


def psff_coeffs(cls, d_a, d_b):
    """Eigenvector-averaged coefficients with K_A = c1 + c2 K."""
    cls = _symmetry_class(cls)
    if d_a < 1 or d_b < 1 or d_a * d_b < 2:
        raise ValueError("need D_A, D_B >= 1 and D_A*D_B >= 2")
    d_a, d_b = float(d_a), float(d_b)
    d = d_a * d_b
    if cls == "unitary":
        den = d * d - 1
        return PsffCoeffs((d_b ** 2 - 1) / den, d_b ** 2 * (d_a ** 2 - 1) / den)
    den = (d - 1) * (d + 2)
    return PsffCoeffs((d_b ** 2 + d_b - 2) / den, d_b * (d + d_b + 1) * (d_a - 1) / den)


def pq_analytic(cls, d_a, d_b):
    """Averaged purity P_B and adjacent overlap Q_B of random eigenvectors."""
    c = psff_coeffs(cls, d_a, d_b)
    q = c.c2 / d_b
    return c.c1 * d_a + q, q


def psff_analytic(kind, params, d_a, d_b, t):
    if d_a * d_b != params.dim:
        raise ValueError("D_A * D_B must equal the dimension")
    c = psff_coeffs(_kind(kind).symmetry_class, d_a, d_b)
    return c.c1 + c.c2 * sff_analytic(kind, params, t)
