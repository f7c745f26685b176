"""Spin-register operators, the driven and long-range chain models, and
time-evolution operators.

Basis convention used everywhere in the package: the computational basis
index is ``b = sum_i s_i 2**(N - i)`` for sites ``i = 1..N``, so site 1 is the
leftmost tensor factor and the most significant bit.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType

import numpy as np

from . import rng as _rng

__all__ = [
    "IDENTITY2", "SIGMA_X", "SIGMA_Y", "SIGMA_Z", "PAULI",
    "OperatorKindError", "SpinRegister", "ModelSpec", "DisorderRealization",
    "FLOQUET_V3", "FLOQUET_V2", "ISING", "RMT", "VARIANTS",
    "check_hermitian", "check_unitary", "embed_site_operator",
    "pauli_string_action", "expm_hermitian", "sample_disorder", "build_v3", "build_v2",
    "build_ising", "build_model", "floquet_from_fields", "ising_from_fields",
    "Propagator", "evolve_hamiltonian", "floquet_power",
]

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = MappingProxyType({"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z})

FLOQUET_V3 = "floquet_v3"
FLOQUET_V2 = "floquet_v2"
ISING = "ising"
RMT = "rmt"
VARIANTS = (FLOQUET_V3, FLOQUET_V2, ISING, RMT)

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10


class OperatorKindError(ValueError):
    """Raised when a matrix fails its hermitian/unitary residual check."""


def check_hermitian(m, tol=HERMITIAN_TOL):
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise OperatorKindError(f"expected square matrix, got shape {m.shape}")
    resid = np.max(np.abs(m - np.swapaxes(m, -1, -2).conj())) if m.size else 0.0
    if resid >= tol:
        raise OperatorKindError(f"hermiticity residual {resid:.3e} exceeds {tol:.1e}")
    return m


def check_unitary(m, tol=UNITARY_TOL):
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise OperatorKindError(f"expected square matrix, got shape {m.shape}")
    eye = np.eye(m.shape[-1])
    resid = np.max(np.abs(np.swapaxes(m, -1, -2).conj() @ m - eye)) if m.size else 0.0
    if resid >= tol:
        raise OperatorKindError(f"unitarity residual {resid:.3e} exceeds {tol:.1e}")
    return m


@dataclass(frozen=True)
class SpinRegister:
    """N spin-1/2 sites with Hilbert-space dimension 2**N."""

    n_sites: int
    max_sites: int = 14

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ValueError(f"n_sites must be a positive integer, got {self.n_sites}")
        if self.n_sites > self.max_sites:
            raise ValueError(f"n_sites={self.n_sites} exceeds cap {self.max_sites}")

    @property
    def dim(self):
        return 2 ** self.n_sites


def _register(reg):
    return reg if isinstance(reg, SpinRegister) else SpinRegister(int(reg))


def embed_site_operator(op, site, reg):
    """Kronecker-embed a 2x2 operator at ``site`` (1-based, site 1 leftmost)."""
    reg = _register(reg)
    op = np.asarray(op)
    if op.shape != (2, 2):
        raise ValueError(f"expected a 2x2 operator, got shape {op.shape}")
    if not 1 <= site <= reg.n_sites:
        raise ValueError(f"site {site} out of range 1..{reg.n_sites}")
    left = np.eye(2 ** (site - 1))
    right = np.eye(2 ** (reg.n_sites - site))
    return np.kron(np.kron(left, op), right)


@lru_cache(maxsize=256)
def _pauli_string_action(n_sites, term):
    cols = np.arange(2 ** n_sites)
    rows = cols.copy()
    vals = np.ones(cols.size, dtype=complex)
    for site, axis in term:
        shift = n_sites - site
        bit = (cols >> shift) & 1
        if axis in ("x", "y"):
            rows = rows ^ (1 << shift)
        if axis == "y":
            # sigma_y |0> = i|1>, sigma_y |1> = -i|0>
            vals = vals * np.where(bit == 0, 1j, -1j)
        elif axis == "z":
            vals = vals * (1 - 2 * bit)
    for a in (rows, cols, vals):
        a.setflags(write=False)
    return rows, cols, vals


def pauli_string_action(n_sites, term):
    """Sparse action of a Pauli string.

    ``term`` maps 1-based sites to axes ``'x'``, ``'y'`` or ``'z'``. Returns
    read-only arrays ``(rows, cols, vals)`` with ``M[rows[k], cols[k]] = vals[k]``
    and every other entry zero.
    """
    items = tuple(sorted(dict(term).items()))
    for site, axis in items:
        if not 1 <= site <= n_sites or axis not in PAULI:
            raise ValueError(f"invalid Pauli term {site}:{axis}")
    return _pauli_string_action(int(n_sites), items)


@dataclass(frozen=True)
class ModelSpec:
    """Model family and its physical parameters.

    ``tau`` defaults to ``3/J`` for the three-step drive, ``2/J`` for the
    two-step drive and ``1`` otherwise. ``ensemble`` names the random-matrix
    ensemble for the ``rmt`` variant.
    """

    variant: str
    J: float = 1.0
    tau: float = None
    alpha: float = 1.2
    W: float = 1.0
    ensemble: str = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not self.J > 0:
            raise ValueError("J must be positive")
        if self.tau is None:
            default = {FLOQUET_V3: 3.0 / self.J, FLOQUET_V2: 2.0 / self.J}.get(self.variant, 1.0)
            object.__setattr__(self, "tau", default)
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.W >= 0:
            raise ValueError("W must be non-negative")
        if self.variant == RMT:
            if self.ensemble is None:
                raise ValueError("rmt variant needs an ensemble kind")
            object.__setattr__(self, "ensemble", str(self.ensemble).upper())

    @property
    def is_floquet(self):
        return self.variant in (FLOQUET_V3, FLOQUET_V2) or (
            self.variant == RMT and self.ensemble in ("CUE", "COE")
        )

    @property
    def field_axes(self):
        return {FLOQUET_V3: ("y", "z", "x"), FLOQUET_V2: ("y", "z"), ISING: ("z",)}.get(
            self.variant, ()
        )


@dataclass(frozen=True)
class DisorderRealization:
    """Per-site fields keyed by the Pauli axis they multiply."""

    fields: dict = field(default_factory=dict)
    master_seed: int = 0
    index: int = 0

    def __post_init__(self):
        frozen = {}
        for k, v in dict(self.fields).items():
            a = np.array(v, dtype=float)
            a.setflags(write=False)
            frozen[k] = a
        object.__setattr__(self, "fields", MappingProxyType(frozen))


def sample_disorder(spec, reg, master_seed, index):
    """Draw the fields of one realization from its own counter-based stream.

    Floquet drives use the box [-J, J] on every field axis; the Ising chain
    uses h_i uniform in (-1, 1), scaled by W inside the Hamiltonian.
    """
    n = _register(reg).n_sites
    gen = _rng.stream(master_seed, index, "disorder")
    if spec.variant in (FLOQUET_V3, FLOQUET_V2):
        draws = gen.uniform(-spec.J, spec.J, size=(len(spec.field_axes), n))
        fields = dict(zip(spec.field_axes, draws))
    elif spec.variant == ISING:
        fields = {"z": gen.uniform(-1.0, 1.0, size=n)}
    else:
        fields = {}
    return DisorderRealization(fields, master_seed, index)


def expm_hermitian(h, t):
    """exp(-i h t) for (a batch of) Hermitian matrices via eigh."""
    e, x = np.linalg.eigh(h)
    return (x * np.exp(-1j * e * t)[..., None, :]) @ np.swapaxes(x, -1, -2).conj()


# (bond axis, field axis) per factor, in left-to-right product order
_DRIVE_STEPS = {
    FLOQUET_V3: (("x", "y"), ("y", "z"), ("z", "x")),
    FLOQUET_V2: (("x", "y"), ("y", "z")),
}


# Local Cliffords c with c s^bond c^dag = X and c s^field c^dag = Z, which map
# every drive step onto the real parity-conserving form J sum XX + sum h Z.
_STEP_ROTATIONS = {
    ("x", "y"): expm_hermitian(SIGMA_X, np.pi / 4),
    ("y", "z"): expm_hermitian(SIGMA_Z, -np.pi / 4),
    ("z", "x"): (SIGMA_X + SIGMA_Z) / np.sqrt(2),
}


@lru_cache(maxsize=None)
def _rotation(n_sites, step):
    out = np.ones((1, 1), dtype=complex)
    for _ in range(n_sites):
        out = np.kron(out, _STEP_ROTATIONS[step])
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _parity_sectors(n_sites):
    """Even-then-odd Z-parity ordering, per-sector XX hopping blocks and site signs."""
    idx = np.arange(2 ** n_sites)
    parity = np.bitwise_count(idx) % 2
    order = np.concatenate([idx[parity == 0], idx[parity == 1]])
    blocks = []
    for states in (order[: idx.size // 2], order[idx.size // 2:]):
        pos = {int(b): k for k, b in enumerate(states)}
        hop = np.zeros((states.size, states.size))
        for k, b in enumerate(states):
            for i in range(n_sites - 1):
                hop[pos[int(b) ^ (3 << (n_sites - i - 2))], k] += 1.0
        bits = (states[:, None] >> (n_sites - 1 - np.arange(n_sites))[None, :]) & 1
        signs = 1.0 - 2.0 * bits
        hop.setflags(write=False)
        signs.setflags(write=False)
        blocks.append((hop, signs))
    order.setflags(write=False)
    return order, tuple(blocks)


def _step_eigensystem(J, h_field, n_sites):
    """Eigenpairs of J sum XX + sum h Z in each parity sector, batched over h."""
    out = []
    for hop, signs in _parity_sectors(n_sites)[1]:
        hm = J * hop + (h_field @ signs.T)[..., None, :] * np.eye(hop.shape[0])
        out.append(np.linalg.eigh(hm))
    return out


def _apply_step(eig, dt, m):
    """exp(-i H' dt) @ m in the sector-ordered basis."""
    # real x complex products go through BLAS on the interleaved float view
    half = m.shape[-2] // 2
    out = np.empty(m.shape, dtype=complex)
    for k, (e, x) in enumerate(eig):
        blk = np.ascontiguousarray(m[..., k * half:(k + 1) * half, :]).view(float)
        coef = (np.swapaxes(x, -1, -2) @ blk).view(complex) * np.exp(-1j * e * dt)[..., None]
        out[..., k * half:(k + 1) * half, :] = (x @ coef.view(float)).view(complex)
    return out


class DriveFactors:
    """Diagonalized drive steps of a Floquet model, batched over realizations.

    Each step is rotated by a fixed product Clifford into a real Hamiltonian
    that conserves Z parity, so it is diagonalized as two real half-size
    blocks. :meth:`apply` evolves states without forming the full operator.
    """

    def __init__(self, spec, fields, reg):
        n = _register(reg).n_sites
        self.n_sites = n
        self.dt = spec.tau / len(_DRIVE_STEPS[spec.variant])
        steps = _DRIVE_STEPS[spec.variant][::-1]  # rightmost factor acts first
        self.eigs = []
        for step in steps:
            h_field = np.asarray(fields[step[1]], dtype=float)
            if h_field.shape[-1] != n:
                raise ValueError(f"field '{step[1]}' has {h_field.shape[-1]} sites, expected {n}")
            self.eigs.append(_step_eigensystem(spec.J, h_field, n))
        self.batch_shape = h_field.shape[:-1]
        order = _parity_sectors(n)[0]
        rots = [_rotation(n, st)[order] for st in steps]
        self.enter = rots[0]
        self.links = [rots[k + 1] @ rots[k].conj().T for k in range(len(rots) - 1)]
        self.exit = rots[-1].conj().T
        self.wrap = rots[0] @ rots[-1].conj().T

    def _period(self, m):
        for k, eig in enumerate(self.eigs):
            if k:
                m = self.links[k - 1] @ m
            m = _apply_step(eig, self.dt, m)
        return m

    def apply(self, m, n_periods=1):
        """V**n_periods @ m for ``m`` of shape batch + (D, K)."""
        m = np.asarray(m, dtype=complex)
        if not n_periods:
            return m.copy()
        m = self.enter @ m
        for k in range(int(n_periods)):
            if k:
                m = self.wrap @ m
            m = self._period(m)
        return self.exit @ m

    def matrix(self):
        m = np.broadcast_to(self.enter, self.batch_shape + self.enter.shape)
        return self.exit @ self._period(m)


def floquet_from_fields(spec, fields, reg):
    """Single-period Floquet operator for one realization or a batch.

    ``fields`` maps a field axis to an array of shape ``(..., N)``; leading
    axes are treated as a batch of independent realizations.
    """
    v = DriveFactors(spec, fields, reg).matrix()
    check_unitary(v)
    return v


def build_v3(spec, dis, reg):
    if spec.variant != FLOQUET_V3:
        raise ValueError("build_v3 needs a floquet_v3 model")
    return floquet_from_fields(spec, dis.fields, reg)


def build_v2(spec, dis, reg):
    if spec.variant != FLOQUET_V2:
        raise ValueError("build_v2 needs a floquet_v2 model")
    return floquet_from_fields(spec, dis.fields, reg)


@lru_cache(maxsize=64)
def _ising_clean_part(n_sites, alpha):
    d = 2 ** n_sites
    s = 1 - 2 * ((np.arange(d)[:, None] >> (n_sites - np.arange(1, n_sites + 1))) & 1)
    diag = np.zeros(d)
    for i in range(n_sites):
        for j in range(i + 1, n_sites):
            diag += s[:, i] * s[:, j] / float(j - i) ** alpha
    flips = np.zeros((d, d))
    for i in range(1, n_sites + 1):
        rows, cols, vals = pauli_string_action(n_sites, {i: "x"})
        flips[rows, cols] += vals.real
    for a in (diag, flips, s):
        a.setflags(write=False)
    return diag, flips, s


def ising_from_fields(spec, h, reg):
    """Real symmetric long-range Ising Hamiltonian, batched over ``h[..., N]``."""
    n = _register(reg).n_sites
    h = np.asarray(h, dtype=float)
    diag, flips, s = _ising_clean_part(n, float(spec.alpha))
    d = 2 ** n
    out = np.broadcast_to(spec.J * flips, h.shape[:-1] + (d, d)).copy()
    local = spec.J * diag + spec.W * (h @ s.T)
    idx = np.arange(d)
    out[..., idx, idx] += local
    return out


def build_ising(spec, dis, reg):
    if spec.variant != ISING:
        raise ValueError("build_ising needs an ising model")
    return check_hermitian(ising_from_fields(spec, dis.fields["z"], reg), 1e-12)


def build_model(spec, reg, master_seed, index):
    """Operator of one realization: Floquet unitary, Hamiltonian or RMT sample.

    Returns ``(operator, kind)`` with kind ``'unitary'`` or ``'hermitian'``.
    """
    reg = _register(reg)
    if spec.variant == RMT:
        from . import rmt

        op = rmt.sample(spec.ensemble, reg.dim, _rng.stream(master_seed, index, "ensemble"))
        return op, ("unitary" if spec.is_floquet else "hermitian")
    dis = sample_disorder(spec, reg, master_seed, index)
    if spec.variant == ISING:
        return build_ising(spec, dis, reg), "hermitian"
    builder = build_v3 if spec.variant == FLOQUET_V3 else build_v2
    return builder(spec, dis, reg), "unitary"


class Propagator:
    """exp(-iHt) from one cached eigendecomposition of H."""

    def __init__(self, hamiltonian):
        h = check_hermitian(hamiltonian)
        e, x = np.linalg.eigh(h)
        e.setflags(write=False)
        x.setflags(write=False)
        self.energies = e
        self.vectors = x

    def __call__(self, t):
        x = self.vectors
        return (x * np.exp(-1j * self.energies * t)) @ x.conj().T


def evolve_hamiltonian(hamiltonian, t):
    """T(t) = exp(-iHt). Accepts a matrix or a :class:`Propagator`."""
    prop = hamiltonian if isinstance(hamiltonian, Propagator) else Propagator(hamiltonian)
    return prop(t)


def floquet_power(v, n):
    """V**n by repeated squaring."""
    if int(n) != n or n < 0:
        raise ValueError(f"n must be a non-negative integer, got {n}")
    check_unitary(v)
    return np.linalg.matrix_power(np.asarray(v), int(n))
