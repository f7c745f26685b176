"""Exact form factors, reduced eigenstates and level statistics.

Two independent routes to the partial form factor are provided:

* trace-wise, from an explicit evolution operator T(t) via the partial trace
  over A (:func:`psff_single`);
* spectral, from the eigendecomposition through the overlap matrix
  ``G_ij = tr[rho_B(E_i) rho_B(E_j)]`` (:func:`overlap_gram`). The same
  matrix gives the purity (diagonal) and adjacent overlap (first
  off-diagonal), so one decomposition serves every quantity of a realization.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.linalg

from . import hilbert

__all__ = [
    "SubsystemMask", "SpectralData", "FormFactorSeries", "EthDiagnostics",
    "RampFit", "EnsembleSamples", "trace_out", "sff_single", "psff_single",
    "eigen_decompose", "reduced_density", "overlap_gram", "purity_and_overlaps",
    "psff_from_gram", "realize_spectrum", "sample_ensemble",
    "ensemble_form_factor", "gap_ratios", "gap_ratio_mean", "linear_fit",
    "detect_ramp_window", "sample_slopes", "shift_extract", "thouless_time",
    "eth_prediction", "spectrum_rescale",
]

log = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class SubsystemMask:
    """Subsystem A as a set of 1-based sites; B is the complement."""

    n_sites: int
    sites: frozenset = frozenset()

    def __post_init__(self):
        sites = frozenset(int(s) for s in self.sites)
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        if any(not 1 <= s <= self.n_sites for s in sites):
            raise ValueError(f"sites {sorted(sites)} out of range 1..{self.n_sites}")
        object.__setattr__(self, "sites", sites)

    @classmethod
    def from_bitstring(cls, bits):
        bits = str(bits).strip()
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"invalid mask bitstring {bits!r}")
        return cls(len(bits), frozenset(i + 1 for i, c in enumerate(bits) if c == "1"))

    @classmethod
    def from_int(cls, n_sites, bits):
        return cls(n_sites, frozenset(i for i in range(1, n_sites + 1) if bits >> (n_sites - i) & 1))

    @classmethod
    def full(cls, n_sites):
        return cls(n_sites, frozenset(range(1, n_sites + 1)))

    @classmethod
    def empty(cls, n_sites):
        return cls(n_sites, frozenset())

    @classmethod
    def middle(cls, n_sites, n_a):
        """Contiguous block of ``n_a`` sites centred in the chain."""
        if not 0 <= n_a <= n_sites:
            raise ValueError(f"n_a={n_a} out of range 0..{n_sites}")
        start = (n_sites - n_a) // 2 + 1
        return cls(n_sites, frozenset(range(start, start + n_a)))

    @property
    def bitstring(self):
        return "".join("1" if i in self.sites else "0" for i in range(1, self.n_sites + 1))

    @property
    def bits(self):
        """Packed integer with site 1 as the most significant bit."""
        return sum(1 << (self.n_sites - i) for i in self.sites)

    @property
    def n_a(self):
        return len(self.sites)

    @property
    def d_a(self):
        return 2 ** self.n_a

    @property
    def d_b(self):
        return 2 ** (self.n_sites - self.n_a)

    @property
    def dim(self):
        return 2 ** self.n_sites

    def complement(self):
        return SubsystemMask(self.n_sites, frozenset(range(1, self.n_sites + 1)) - self.sites)

    def subsets(self):
        """All masks B with B a subset of this mask, empty first."""
        members = sorted(self.sites)
        for k in range(len(members) + 1):
            for combo in combinations(members, k):
                yield SubsystemMask(self.n_sites, frozenset(combo))

    def __str__(self):
        return self.bitstring


def _as_mask(mask, n_sites=None):
    if isinstance(mask, SubsystemMask):
        return mask
    if isinstance(mask, str):
        return SubsystemMask.from_bitstring(mask)
    if n_sites is None:
        raise ValueError("n_sites needed to interpret a site collection as a mask")
    return SubsystemMask(n_sites, frozenset(mask))


def _n_sites_of(dim):
    n = int(round(np.log2(dim)))
    if 2 ** n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def _axes_order(mask):
    a = [s - 1 for s in sorted(mask.sites)]
    b = [s - 1 for s in range(1, mask.n_sites + 1) if s not in mask.sites]
    return a, b


def trace_out(op, mask):
    """tr_A of an operator on the full register (batched over leading axes)."""
    op = np.asarray(op)
    mask = _as_mask(mask, _n_sites_of(op.shape[-1]))
    n = mask.n_sites
    if op.shape[-1] != 2 ** n:
        raise ValueError("operator and mask sizes disagree")
    lead = op.shape[:-2]
    a, b = _axes_order(mask)
    k = len(lead)
    perm = list(range(k)) + [k + i for i in a + b] + [k + n + i for i in a + b]
    t = op.reshape(lead + (2,) * (2 * n)).transpose(perm)
    t = t.reshape(lead + (mask.d_a, mask.d_b, mask.d_a, mask.d_b))
    return np.trace(t, axis1=-4, axis2=-2)


def sff_single(t_op):
    """|tr T|^2 / D^2 for one unitary (or a batch)."""
    t_op = np.asarray(t_op)
    d = t_op.shape[-1]
    return np.abs(np.trace(t_op, axis1=-2, axis2=-1)) ** 2 / d ** 2


def psff_single(t_op, mask):
    """tr_B[tr_A T tr_A T^dagger] / (D D_A) computed by explicit partial trace."""
    t_op = np.asarray(t_op)
    mask = _as_mask(mask, _n_sites_of(t_op.shape[-1]))
    if mask.n_a == mask.n_sites:
        return sff_single(t_op)
    red = trace_out(t_op, mask)
    return np.sum(np.abs(red) ** 2, axis=(-2, -1)) / (mask.dim * mask.d_a)


@dataclass(frozen=True)
class SpectralData:
    """Sorted (quasi-)energies and matching eigenvector columns.

    ``period`` is set for Floquet operators; quasi-energies then lie in
    [0, 2 pi / period).
    """

    energies: np.ndarray
    vectors: np.ndarray
    period: float = None

    @property
    def dim(self):
        return self.energies.size

    def phases(self, t):
        """exp(-i E t) for every level (rows: times, columns: levels)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.exp(-1j * np.outer(t, self.energies))

    def evolution(self, t):
        x = self.vectors
        return (x * self.phases(t)[0]) @ x.conj().T


def _warn_degeneracies(energies):
    gaps = np.diff(energies)
    n_close = int(np.sum(gaps < DEGENERACY_TOL))
    if n_close:
        log.warning("%d near-degenerate level pairs (gap < %.0e); ties broken by eigenvector index",
                    n_close, DEGENERACY_TOL)
    return n_close


def eigen_decompose(op, tau=None):
    """Eigendecomposition of a Hermitian H, or of a unitary V when ``tau`` is given.

    Unitaries are diagonalised through the complex Schur form, which keeps
    the eigenvector matrix exactly unitary even for close eigenvalues.
    Quasi-energies follow ``V |E> = exp(-i E tau) |E>`` with E in [0, 2 pi / tau).
    """
    op = np.asarray(op)
    d = op.shape[-1]
    if tau is None:
        hilbert.check_hermitian(op)
        energies, vectors = np.linalg.eigh(op)
        scale = max(float(np.max(np.abs(energies))), 1.0)
        resid = np.max(np.abs(op @ vectors - vectors * energies))
        if resid > 1e-8 * scale:
            raise np.linalg.LinAlgError(f"eigen residual {resid:.2e} too large")
    else:
        if not tau > 0:
            raise ValueError("tau must be positive")
        hilbert.check_unitary(op)
        tri, vectors = scipy.linalg.schur(op.astype(complex), output="complex")
        lam = np.diag(tri)
        off = np.max(np.abs(np.triu(tri, 1))) if d > 1 else 0.0
        if off > 1e-8 or np.max(np.abs(np.abs(lam) - 1)) > 1e-8:
            raise np.linalg.LinAlgError("Schur form of the unitary is not diagonal")
        period = 2 * np.pi / tau
        energies = np.mod(-np.angle(lam) / tau, period)
        energies[energies >= period] = 0.0
        order = np.argsort(energies, kind="stable")
        energies, vectors = energies[order], vectors[:, order]
    if np.max(np.abs(vectors.conj().T @ vectors - np.eye(d))) > 1e-8:
        raise np.linalg.LinAlgError("eigenvectors are not orthonormal")
    _warn_degeneracies(energies)
    energies.setflags(write=False)
    vectors.setflags(write=False)
    return SpectralData(energies, vectors, tau)


def _split(vectors, mask):
    """Columns of ``vectors`` reshaped to (K, D_A, D_B) coefficient matrices."""
    v = np.asarray(vectors)
    if v.ndim == 1:
        v = v[:, None]
    k = v.shape[1]
    a, b = _axes_order(mask)
    t = v.T.reshape((k,) + (2,) * mask.n_sites)
    t = t.transpose([0] + [1 + i for i in a + b])
    return t.reshape(k, mask.d_a, mask.d_b)


def reduced_density(vector, mask):
    """rho_B = tr_A |psi><psi| as a D_B x D_B matrix (batched over columns)."""
    vector = np.asarray(vector)
    mask = _as_mask(mask, _n_sites_of(vector.shape[0]))
    m = _split(vector, mask)
    rho = np.einsum("kab,kac->kbc", m, m.conj())
    return rho[0] if vector.ndim == 1 else rho


def overlap_gram(spec, mask, block=256):
    """Matrix of tr[rho_B(E_i) rho_B(E_j)] over all eigenstate pairs.

    Works in whichever of the D_B^2 (reduced density) or D_A^2 (coefficient
    product) representations is cheaper.
    """
    mask = _as_mask(mask, _n_sites_of(spec.dim))
    d = spec.dim
    if mask.n_a == 0:
        return np.eye(d)
    if mask.n_a == mask.n_sites:
        return np.ones((d, d))
    m = _split(spec.vectors, mask)
    if mask.d_b <= mask.d_a ** 2:
        rho = np.einsum("kab,kac->kbc", m, m.conj()).reshape(d, -1)
        return (rho @ rho.conj().T).real
    # |sum_b M_i[a,b] M_j[a',b]^*|^2 summed over a, a'
    flat = m.reshape(d * mask.d_a, mask.d_b)
    gram = np.empty((d, d))
    for i0 in range(0, d, block):
        i1 = min(d, i0 + block)
        c = flat[i0 * mask.d_a:i1 * mask.d_a] @ flat.conj().T
        c = np.abs(c.reshape(i1 - i0, mask.d_a, d, mask.d_a)) ** 2
        gram[i0:i1] = c.sum(axis=(1, 3))
    return gram


def psff_from_gram(spec, gram, mask, times, phases=None):
    """K_A(t) for one realization from its overlap matrix.

    ``phases`` may pass a precomputed ``spec.phases(times)`` to share it
    between masks.
    """
    mask = _as_mask(mask, _n_sites_of(spec.dim))
    phi = spec.phases(times) if phases is None else phases
    g = gram.astype(complex) if np.isrealobj(gram) else gram
    vals = np.sum((phi @ g) * phi.conj(), axis=1).real
    return vals / (spec.dim * mask.d_a)


@dataclass(frozen=True)
class EthDiagnostics:
    """Averaged purity and adjacent overlap of reduced eigenstates.

    ``delta_P_B = P_B - Q_B`` sets the early-time PSFF shift and
    ``Delta_P_B = Q_B - 1/D_B`` the deviation from random-state overlaps.
    """

    P_B: float
    Q_B: float
    mask: SubsystemMask
    n_realizations: int = 1
    P_B_stderr: float = 0.0
    Q_B_stderr: float = 0.0

    @property
    def delta_P_B(self):
        return self.P_B - self.Q_B

    @property
    def Delta_P_B(self):
        return self.Q_B - 1.0 / self.mask.d_b

    @classmethod
    def average(cls, items):
        items = list(items)
        if not items:
            raise ValueError("nothing to average")
        p = np.array([x.P_B for x in items])
        q = np.array([x.Q_B for x in items])
        n = len(items)
        err = (lambda a: float(a.std(ddof=1) / np.sqrt(n))) if n > 1 else (lambda a: 0.0)
        return cls(float(p.mean()), float(q.mean()), items[0].mask, n, err(p), err(q))


def _pq_from_gram(gram):
    d = gram.shape[0]
    p = float(np.trace(gram) / d)
    q = float(np.mean(np.diagonal(gram, 1))) if d > 1 else 0.0
    return p, q


def purity_and_overlaps(spec, mask):
    """P_B and Q_B of one realization (neighbours paired in sorted energy order)."""
    mask = _as_mask(mask, _n_sites_of(spec.dim))
    p, q = _pq_from_gram(overlap_gram(spec, mask))
    return EthDiagnostics(p, q, mask)


@dataclass(frozen=True)
class FormFactorSeries:
    """One curve K(t) or K_A(t) with optional standard errors."""

    times: np.ndarray
    values: np.ndarray
    mask: SubsystemMask
    stderr: np.ndarray = None
    provenance: str = "exact"
    n_realizations: int = 1

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be 1-d and of equal length")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if self.stderr is not None:
            err = np.asarray(self.stderr, dtype=float)
            if err.shape != times.shape or np.any(err < 0):
                raise ValueError("stderr must match times and be non-negative")
            object.__setattr__(self, "stderr", err)
        if self.provenance not in ("exact", "estimated", "analytic"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def at(self, t):
        idx = np.flatnonzero(np.isclose(self.times, t, rtol=1e-12, atol=1e-12))
        if idx.size == 0:
            raise KeyError(f"time {t} not on the grid")
        return int(idx[0])


def realize_spectrum(spec, reg, master_seed, index):
    op, kind = hilbert.build_model(spec, reg, master_seed, index)
    return eigen_decompose(op, spec.tau if kind == "unitary" else None)


@dataclass
class EnsembleSamples:
    """Per-realization data: ``psff[mask]`` has shape (n_realizations, n_times)."""

    times: np.ndarray
    masks: list
    psff: dict
    purity: dict
    overlap: dict
    gap_ratio: np.ndarray
    energies: list = field(default_factory=list)

    @property
    def n_realizations(self):
        return self.gap_ratio.size

    def series(self, mask):
        vals = self.psff[mask]
        n = vals.shape[0]
        err = vals.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(vals.shape[1])
        return FormFactorSeries(self.times, vals.mean(axis=0), mask, err, "exact", n)

    def diagnostics(self, mask):
        return EthDiagnostics.average(
            EthDiagnostics(p, q, mask) for p, q in zip(self.purity[mask], self.overlap[mask])
        )


def _check_floquet_times(spec, times):
    n = times / spec.tau
    if np.any(np.abs(n - np.round(n)) > 1e-9 * np.maximum(1, np.abs(n))):
        raise ValueError("Floquet time grids must be integer multiples of tau")


def _one_realization(spec, reg, seed, index, masks, times, method, keep_energies):
    data = realize_spectrum(spec, reg, seed, index)
    out = {}
    phi = data.phases(times) if method == "spectral" else None
    for mask in masks:
        gram = overlap_gram(data, mask)
        p, q = _pq_from_gram(gram)
        if method == "spectral":
            vals = psff_from_gram(data, gram, mask, times, phi)
        else:
            vals = np.array([psff_single(data.evolution(t), mask) for t in times])
        out[mask] = (vals, p, q)
    r = gap_ratio_mean(data.energies) if data.dim >= 3 else np.nan
    return out, r, (data.energies if keep_energies else None)


def sample_ensemble(spec, reg, masks, times, n_realizations, seed, *, method="spectral",
                    threads=1, keep_energies=False, start=0):
    """Exact per-realization PSFFs, purities, overlaps and gap ratios.

    ``method='spectral'`` uses the overlap matrix; ``method='trace'`` builds
    T(t) for every time and takes explicit partial traces. Realizations are
    independent counter-based streams, and results are stored by index, so
    the output does not depend on ``threads``.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    if method not in ("spectral", "trace"):
        raise ValueError(f"unknown method {method!r}")
    reg = reg if isinstance(reg, hilbert.SpinRegister) else hilbert.SpinRegister(int(reg))
    masks = [_as_mask(m, reg.n_sites) for m in masks]
    times = np.asarray(times, dtype=float)
    if spec.is_floquet:
        _check_floquet_times(spec, times)

    def job(i):
        return _one_realization(spec, reg, seed, start + i, masks, times, method, keep_energies)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(n_realizations)))
    else:
        results = [job(i) for i in range(n_realizations)]
    psff = {m: np.array([r[0][m][0] for r in results]) for m in masks}
    purity = {m: np.array([r[0][m][1] for r in results]) for m in masks}
    overlap = {m: np.array([r[0][m][2] for r in results]) for m in masks}
    gaps = np.array([r[1] for r in results])
    energies = [r[2] for r in results] if keep_energies else []
    return EnsembleSamples(times, masks, psff, purity, overlap, gaps, energies)


def ensemble_form_factor(spec, reg, masks, times, n_realizations, seed, **kwargs):
    """Ensemble-averaged PSFF per mask (mean and standard error over realizations)."""
    samples = sample_ensemble(spec, reg, masks, times, n_realizations, seed, **kwargs)
    return {m: samples.series(m) for m in samples.masks}


def gap_ratios(energies):
    """Adjacent gap ratios r_m = min(g_m, g_{m+1}) / max(g_m, g_{m+1}).

    Pairs with both gaps zero are dropped; a single zero gap gives r = 0.
    """
    e = np.sort(np.asarray(energies, dtype=float))
    if e.size < 3:
        raise ValueError("need at least 3 levels")
    g = np.diff(e)
    lo = np.minimum(g[:-1], g[1:])
    hi = np.maximum(g[:-1], g[1:])
    keep = hi > 0
    if not np.all(keep):
        log.warning("%d doubly degenerate gap pairs skipped", int(np.sum(~keep)))
    return lo[keep] / hi[keep]


def gap_ratio_mean(energies):
    return float(np.mean(gap_ratios(energies)))


@dataclass(frozen=True)
class RampFit:
    start: float
    stop: float
    slope: float
    intercept: float
    slope_stderr: float
    r_squared: float

    @property
    def midpoint(self):
        return 0.5 * (self.start + self.stop)


def linear_fit(t, y, sigma=None):
    """Least-squares line; returns (slope, intercept, slope_stderr, r_squared)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(t) if sigma is None else 1.0 / np.maximum(np.asarray(sigma, float), 1e-300) ** 2
    sw, st, sy = w.sum(), (w * t).sum(), (w * y).sum()
    stt, sty = (w * t * t).sum(), (w * t * y).sum()
    den = sw * stt - st ** 2
    slope = (sw * sty - st * sy) / den
    intercept = (sy - slope * st) / sw
    resid = y - (slope * t + intercept)
    if sigma is None:
        dof = max(t.size - 2, 1)
        s2 = (resid ** 2).sum() / dof
        slope_err = np.sqrt(s2 * sw / den)
    else:
        slope_err = np.sqrt(sw / den)
    ybar = sy / sw
    ss_tot = (w * (y - ybar) ** 2).sum()
    r2 = 1.0 - (w * resid ** 2).sum() / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(intercept), float(slope_err), float(r2)


def detect_ramp_window(series, t_max=None, width=None, t_min=None):
    """Best linear fit over sliding windows of a form-factor curve.

    Windows of ``width`` consecutive grid points (default: a quarter of the
    points in range) are scanned; the positive-slope window with the largest
    coefficient of determination wins.
    """
    t = series.times
    keep = np.ones(t.size, bool)
    if t_max is not None:
        keep &= t <= t_max
    if t_min is not None:
        keep &= t >= t_min
    idx = np.flatnonzero(keep)
    if idx.size < 3:
        raise ValueError("not enough grid points for a ramp fit")
    width = max(3, idx.size // 4) if width is None else int(width)
    width = min(width, idx.size)
    err = series.stderr
    best = None
    for s in range(idx.size - width + 1):
        sl = idx[s:s + width]
        sig = None if err is None or np.any(err[sl] <= 0) else err[sl]
        slope, icpt, serr, r2 = linear_fit(t[sl], series.values[sl], sig)
        if slope <= 0:
            continue
        if best is None or r2 > best.r_squared:
            best = RampFit(float(t[sl[0]]), float(t[sl[-1]]), slope, icpt, serr, r2)
    if best is None:
        raise ValueError("no window with a positive slope")
    return best


def sample_slopes(times, samples, start, stop):
    """Per-realization least-squares slopes over [start, stop]; returns (mean, stderr).

    Fitting each realization separately and averaging keeps the error bar
    honest when neighbouring times are strongly correlated.
    """
    times = np.asarray(times, float)
    sel = (times >= start) & (times <= stop)
    t = times[sel]
    y = np.asarray(samples)[:, sel]
    tc = t - t.mean()
    slopes = (y - y.mean(axis=1, keepdims=True)) @ tc / (tc @ tc)
    n = slopes.size
    return float(slopes.mean()), float(slopes.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0


def shift_extract(k_a, k, t0=None):
    """K_A(t0) - K(t0); ``t0`` defaults to the grid point nearest the ramp midpoint."""
    if not np.array_equal(k_a.times, k.times):
        raise ValueError("series must share a time grid")
    if t0 is None:
        mid = detect_ramp_window(k).midpoint
        t0 = float(k.times[np.argmin(np.abs(k.times - mid))])
    i = k.at(t0)
    return float(k_a.values[k_a.at(t0)] - k.values[i])


def thouless_time(series, reference, tol=0.2, consecutive=3):
    """First time after which |K - K_ref| / K_ref < tol for ``consecutive`` points."""
    ref = np.asarray(reference, float)
    ok = np.abs(series.values - ref) < tol * np.abs(ref)
    run = 0
    for i, good in enumerate(ok):
        run = run + 1 if good else 0
        if run == consecutive:
            return float(series.times[i - consecutive + 1])
    return None


def eth_prediction(delta_p, big_delta_p, beta, gamma, dim, d_a, d_b, t_h, t,
                   big_delta_p_tilde=None):
    """PSFF predicted from reduced-eigenstate statistics at constant density of states.

    Ramp branch (t < t_H): delta_p/D_A + gamma t (1 + D_B dP~) / (beta pi D^2).
    Plateau branch: delta_p/D_A + (1 + D_B dP) / D.
    """
    if beta not in (1, 2):
        raise ValueError("beta must be 1 or 2")
    if big_delta_p_tilde is None:
        big_delta_p_tilde = big_delta_p
    t = np.asarray(t, float)
    ramp = gamma * t * (1 + d_b * big_delta_p_tilde) / (beta * np.pi * dim)
    plateau = 1 + d_b * big_delta_p
    out = delta_p / d_a + np.where(t < t_h, ramp, plateau) / dim
    return float(out) if out.ndim == 0 else out


def spectrum_rescale(energies, target_mean_spacing):
    """Affine map about the lowest level giving the requested mean spacing."""
    e = np.asarray(energies, dtype=float)
    if e.size < 2:
        raise ValueError("need at least 2 levels")
    if not target_mean_spacing > 0:
        raise ValueError("target spacing must be positive")
    lo = e.min()
    spacing = (e.max() - lo) / (e.size - 1)
    if spacing == 0:
        raise ValueError("spectrum has zero width")
    return lo + (e - lo) * (target_mean_spacing / spacing)
