"""Randomized-measurement protocol: shot simulation, estimators and exact oracles.

One run prepares |0...0>, applies local random unitaries U = u_1 x ... x u_N,
evolves with T, undoes U and measures every qubit in the computational
basis. The single-shot value (-2)^(-|s_A|) of the outcome bitstring s is an
unbiased estimate of the partial form factor K_A, and every mask can be
evaluated from the same set of shots.
"""

import csv
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import comb

import numpy as np

from . import hilbert
from .rmt import haar_unitary
from .spectral import SubsystemMask, _as_mask, _n_sites_of

__all__ = [
    "TwoDesignKind", "ProbabilityError", "ShotRecord", "ShotSet", "EstimatorResult",
    "clifford_group", "sample_local_unitaries", "product_state", "apply_local",
    "born_probabilities", "sample_outcomes", "run_shot", "single_shot_values",
    "averaged_shot_values", "estimate_sff", "estimate_psff", "estimate_avg_psff",
    "exact_shot_expectation", "twirl_check", "bell_survival_check",
    "write_shots", "read_shots", "ONE_QUBIT_OBSERVABLE",
]

ONE_QUBIT_OBSERVABLE = np.diag([1.0, -0.5]).astype(complex)
PROBABILITY_TOL = 1e-8


class TwoDesignKind(str, Enum):
    CLIFFORD = "clifford"
    HAAR = "haar"


class ProbabilityError(RuntimeError):
    """Born probabilities do not sum to one."""


def _canonical_phase(u):
    k = np.flatnonzero(np.abs(u.ravel()) > 1e-9)[0]
    ph = u.ravel()[k] / abs(u.ravel()[k])
    return u / ph


@lru_cache(maxsize=1)
def _clifford_table():
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    s = np.diag([1, 1j])
    found = {}
    frontier = [np.eye(2, dtype=complex)]
    while frontier:
        nxt = []
        for g in frontier:
            g = _canonical_phase(g)
            key = tuple(np.round(g.ravel(), 9))
            if key in found:
                continue
            found[key] = g
            nxt.extend([h @ g, s @ g])
        frontier = nxt
    table = np.array(list(found.values()))
    table.setflags(write=False)
    return table


def clifford_group():
    """The 24 single-qubit Clifford unitaries (one representative per phase class)."""
    return _clifford_table()


def sample_local_unitaries(kind, n_sites, rng, size=None):
    """``n_sites`` independent 2x2 unitaries; ``size`` adds leading batch axes."""
    kind = TwoDesignKind(kind)
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (n_sites,)
    if kind is TwoDesignKind.CLIFFORD:
        return clifford_group()[rng.integers(0, 24, size=shape)]
    return haar_unitary(2, rng, size=shape)


@dataclass(frozen=True)
class ShotRecord:
    """One protocol run. ``bitstring`` lists sites 1..N left to right."""

    realization: int
    time: float
    bitstring: str
    master_seed: int = None

    def __post_init__(self):
        if not self.bitstring or set(self.bitstring) - {"0", "1"}:
            raise ValueError(f"invalid bitstring {self.bitstring!r}")

    @property
    def n_sites(self):
        return len(self.bitstring)

    @property
    def bits(self):
        return int(self.bitstring, 2)


def _bitstring(bits, n_sites):
    return format(int(bits), f"0{n_sites}b")


class ShotSet:
    """Immutable columnar collection of shots sharing one register size."""

    def __init__(self, n_sites, realization, time, bits, master_seed=None):
        self.n_sites = int(n_sites)
        self.realization = np.array(realization, dtype=np.int64)
        self.time = np.array(time, dtype=float)
        self.bits = np.array(bits, dtype=np.int64)
        if not (self.realization.shape == self.time.shape == self.bits.shape) or self.bits.ndim != 1:
            raise ValueError("shot columns must be 1-d and of equal length")
        if self.bits.size and (self.bits.min() < 0 or self.bits.max() >= 2 ** self.n_sites):
            raise ValueError("bitstring out of range for the register")
        for a in (self.realization, self.time, self.bits):
            a.setflags(write=False)
        self.master_seed = master_seed

    def __len__(self):
        return self.bits.size

    def __iter__(self):
        for r, t, b in zip(self.realization, self.time, self.bits):
            yield ShotRecord(int(r), float(t), _bitstring(b, self.n_sites), self.master_seed)

    def __eq__(self, other):
        return (isinstance(other, ShotSet) and self.n_sites == other.n_sites
                and np.array_equal(self.realization, other.realization)
                and np.array_equal(self.time, other.time)
                and np.array_equal(self.bits, other.bits))

    @classmethod
    def from_records(cls, records):
        records = list(records)
        if not records:
            raise ValueError("no shot records")
        n = records[0].n_sites
        if any(r.n_sites != n for r in records):
            raise ValueError("shot records disagree on the register size")
        return cls(n, [r.realization for r in records], [r.time for r in records],
                   [r.bits for r in records], records[0].master_seed)

    @classmethod
    def concatenate(cls, sets):
        sets = list(sets)
        return cls(sets[0].n_sites, np.concatenate([s.realization for s in sets]),
                   np.concatenate([s.time for s in sets]), np.concatenate([s.bits for s in sets]),
                   sets[0].master_seed)

    @property
    def times(self):
        return np.unique(self.time)

    def at_time(self, t):
        sel = np.isclose(self.time, t, rtol=1e-12, atol=1e-12)
        return ShotSet(self.n_sites, self.realization[sel], self.time[sel], self.bits[sel],
                       self.master_seed)


def _as_shotset(shots):
    if isinstance(shots, ShotSet):
        return shots
    return ShotSet.from_records(shots)


def product_state(unitaries):
    """U|0...0> for local unitaries of shape (..., N, 2, 2)."""
    u = np.asarray(unitaries)
    vec = u[..., 0, :, 0]
    for i in range(1, u.shape[-3]):
        vec = (vec[..., :, None] * u[..., i, :, 0][..., None, :]).reshape(vec.shape[:-1] + (-1,))
    return vec


def apply_local(psi, unitaries):
    """Apply u_1 x ... x u_N to state vectors of shape (..., D)."""
    u = np.asarray(unitaries)
    psi = np.asarray(psi)
    n = u.shape[-3]
    lead = psi.shape[:-1]
    for i in range(n):
        t = psi.reshape(lead + (2 ** i, 2, 2 ** (n - i - 1)))
        psi = np.einsum("...xy,...syr->...sxr", u[..., i, :, :], t).reshape(lead + (-1,))
    return psi


def _dagger(u):
    return np.swapaxes(np.asarray(u), -1, -2).conj()


def born_probabilities(t_op, unitaries, final=None):
    """|<s| F T U |0>|^2 with F = U^dagger unless ``final`` rotations are given."""
    t_op = np.asarray(t_op)
    psi0 = product_state(unitaries)
    psi = np.einsum("...ij,...j->...i", t_op, psi0)
    psi = apply_local(psi, _dagger(unitaries) if final is None else final)
    return np.abs(psi) ** 2


def sample_outcomes(probs, uniforms):
    """Inverse-CDF sampling on the full probability vector(s)."""
    probs = np.asarray(probs)
    total = probs.sum(axis=-1)
    if np.any(np.abs(total - 1) > PROBABILITY_TOL):
        raise ProbabilityError(f"probabilities sum to {total!r}")
    cdf = np.cumsum(probs, axis=-1)
    u = np.asarray(uniforms)[..., None]
    idx = np.sum(cdf <= u, axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def run_shot(t_op, local_unitaries, rng, *, realization=0, time=0.0, master_seed=None):
    """One protocol run on a fixed evolution operator T."""
    hilbert.check_unitary(t_op)
    u = np.asarray(local_unitaries)
    n = _n_sites_of(np.asarray(t_op).shape[-1])
    if u.shape != (n, 2, 2):
        raise ValueError(f"expected {n} local 2x2 unitaries")
    p = born_probabilities(t_op, u)
    b = int(sample_outcomes(p, rng.random()))
    return ShotRecord(realization, float(time), _bitstring(b, n), master_seed)


@lru_cache(maxsize=None)
def _popcount_table(n_sites):
    x = np.arange(2 ** n_sites)
    return np.bitwise_count(x).astype(np.int64) if hasattr(np, "bitwise_count") else \
        np.array([bin(v).count("1") for v in x])


def single_shot_values(bits, mask):
    """(-2)^(-|s_A|) for packed bitstrings."""
    weights = _popcount_table(mask.n_sites)[np.asarray(bits) & mask.bits]
    return (-0.5) ** weights


def _average_table(n_sites, n_a):
    # value for a shot of Hamming weight w, averaged over all size-n_a masks
    norm = comb(n_sites, n_a)
    out = np.zeros(n_sites + 1)
    for w in range(n_sites + 1):
        out[w] = sum(comb(w, j) * comb(n_sites - w, n_a - j) * (-0.5) ** j
                     for j in range(0, min(w, n_a) + 1)) / norm
    return out


def averaged_shot_values(bits, n_sites, n_a):
    """Per-shot value averaged over all masks with ``n_a`` sites.

    The average only depends on the Hamming weight w of the shot: exactly
    C(w, j) C(N - w, n_a - j) masks overlap the set bits in j places.
    """
    if not 0 <= n_a <= n_sites:
        raise ValueError(f"n_a={n_a} out of range 0..{n_sites}")
    w = _popcount_table(n_sites)[np.asarray(bits)]
    return _average_table(n_sites, n_a)[w]


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    stderr: float
    M: int
    mask: SubsystemMask = None
    n_a: int = None


def _summarize(values, mask=None, n_a=None):
    m = values.size
    if m == 0:
        raise ValueError("no shots")
    err = float(values.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return EstimatorResult(float(values.mean()), err, int(m), mask, n_a)


def estimate_psff(shots, mask):
    """Mean of (-2)^(-|s_A|) over the shots."""
    shots = _as_shotset(shots)
    mask = _as_mask(mask, shots.n_sites)
    if mask.n_sites != shots.n_sites:
        raise ValueError("mask and shots disagree on the register size")
    return _summarize(single_shot_values(shots.bits, mask), mask=mask, n_a=mask.n_a)


def estimate_sff(shots):
    shots = _as_shotset(shots)
    return estimate_psff(shots, SubsystemMask.full(shots.n_sites))


def estimate_avg_psff(shots, n_a):
    """PSFF averaged over every subsystem of size ``n_a``, evaluated shot by shot."""
    shots = _as_shotset(shots)
    return _summarize(averaged_shot_values(shots.bits, shots.n_sites, n_a), n_a=n_a)


def _all_local_products(n_sites):
    table = clifford_group()
    prod = table
    for _ in range(n_sites - 1):
        prod = np.einsum("aij,bkl->abikjl", prod, table).reshape(
            prod.shape[0] * 24, prod.shape[1] * 2, prod.shape[2] * 2)
    return prod


def exact_shot_expectation(t_op, mask, kind=TwoDesignKind.CLIFFORD):
    """E_U E_Born[(-2)^(-|s_A|)] by enumerating all 24^N local Clifford tuples."""
    if TwoDesignKind(kind) is not TwoDesignKind.CLIFFORD:
        raise ValueError("exact enumeration needs the Clifford group")
    t_op = np.asarray(t_op)
    n = _n_sites_of(t_op.shape[-1])
    if n > 3:
        raise ValueError("exact enumeration is limited to N <= 3")
    mask = _as_mask(mask, n)
    u = _all_local_products(n)
    psi = u[:, :, 0] @ t_op.T
    psi = np.einsum("mji,mj->mi", u.conj(), psi)
    probs = np.abs(psi) ** 2
    vals = single_shot_values(np.arange(2 ** n), mask)
    return float(np.mean(probs @ vals))


def _twirl_term(u, o, rho):
    left = u.conj() @ o.T @ np.swapaxes(u, -1, -2)
    right = u @ rho @ _dagger(u)
    return np.einsum("...ij,...kl->...ikjl", left, right).reshape(u.shape[:-2] + (4, 4))


def twirl_check(o, rho, kind=TwoDesignKind.CLIFFORD, n_samples=100000, rng=None,
                return_stderr=False):
    """E_u[u* O^T u^T (x) u rho u^dagger], exact for Clifford, Monte Carlo for Haar."""
    o = np.asarray(o, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if TwoDesignKind(kind) is TwoDesignKind.CLIFFORD:
        out = _twirl_term(clifford_group(), o, rho).mean(axis=0)
        return (out, np.zeros((4, 4))) if return_stderr else out
    if rng is None:
        raise ValueError("Haar twirl needs an rng")
    terms = _twirl_term(haar_unitary(2, rng, size=n_samples), o, rho)
    mean = terms.mean(axis=0)
    if not return_stderr:
        return mean
    err = np.sqrt(terms.real.var(axis=0, ddof=1) + terms.imag.var(axis=0, ddof=1))
    return mean, err / np.sqrt(n_samples)


def bell_survival_check(t_op):
    """|<Phi+_N| 1 (x) T |Phi+_N>|^2 with the doubled register built explicitly."""
    t_op = np.asarray(t_op)
    d = t_op.shape[-1]
    if _n_sites_of(d) > 6:
        raise ValueError("limited to N <= 6")
    hilbert.check_unitary(t_op)
    phi = np.zeros((d, d), dtype=complex)
    idx = np.arange(d)
    phi[idx, idx] = 1 / np.sqrt(d)
    # second copy is the fast index: (1 x T) acts on axis 1
    evolved = phi @ t_op.T
    amp = np.vdot(phi.ravel(), evolved.ravel())
    amp_dag = np.vdot(phi.ravel(), (phi @ t_op.conj()).ravel())
    return float((amp * amp_dag).real)


SHOT_HEADER = ("realization", "time", "bitstring")


def write_shots(path, shots):
    shots = _as_shotset(shots)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SHOT_HEADER)
        for r, t, b in zip(shots.realization, shots.time, shots.bits):
            w.writerow((int(r), format(float(t), ".17g"), _bitstring(b, shots.n_sites)))


def read_shots(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != SHOT_HEADER:
        raise ValueError(f"{path}: expected header {','.join(SHOT_HEADER)}")
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: no shots")
    n = len(body[0][2])
    for k, row in enumerate(body, start=2):
        if len(row) != 3 or len(row[2]) != n:
            raise ValueError(f"{path}:{k}: malformed shot line")
    return ShotSet(n, [int(r[0]) for r in body], [float(r[1]) for r in body],
                   [int(r[2], 2) for r in body])
