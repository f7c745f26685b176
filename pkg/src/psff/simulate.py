"""Monte Carlo driver for the measurement protocol over disorder ensembles.

Every shot index r owns a disorder realization (shared by all times of that
index) and four independent streams: ``disorder``/``ensemble`` for the model,
``shots`` for local unitaries and Born draws, ``decorrelation`` for the
final-rotation generators and ``depolarization`` for the noise coin flips.
Shot generation is batched for speed, but the result does not depend on the
batch size or thread count.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import hilbert, noise, rmt
from . import rng as _rng
from .protocol import (ShotSet, TwoDesignKind, apply_local, averaged_shot_values,
                       product_state, sample_local_unitaries, sample_outcomes,
                       single_shot_values)
from .spectral import FormFactorSeries, SubsystemMask, _as_mask

__all__ = ["simulate_shots", "expected_run_values", "estimate_series", "rescale_series"]

BATCH_BYTES = 64 * 2 ** 20


def _operators(spec, reg, seed, indices):
    """Floquet unitaries (B, D, D) or Hamiltonian eigendata for a batch."""
    if spec.variant == hilbert.RMT:
        ops = np.array([rmt.sample(spec.ensemble, reg.dim, _rng.stream(seed, int(r), "ensemble"))
                        for r in indices])
        if spec.is_floquet:
            return "floquet", ops
        e, x = np.linalg.eigh(ops)
        return "hamiltonian", (e, x)
    dis = [hilbert.sample_disorder(spec, reg, seed, int(r)) for r in indices]
    fields = {k: np.array([d.fields[k] for d in dis]) for k in spec.field_axes}
    if spec.variant == hilbert.ISING:
        e, x = np.linalg.eigh(hilbert.ising_from_fields(spec, fields["z"], reg))
        return "hamiltonian", (e, x)
    return "floquet", hilbert.DriveFactors(spec, fields, reg).matrix()


def _evolve_floquet(v, psi, steps):
    # psi: (B, K, D) rows; row k needs V**steps[k], advanced in order of steps
    order = np.argsort(steps, kind="stable")
    cur = np.array(psi[:, order, :], dtype=complex)
    vt = np.swapaxes(v, 1, 2)
    done = 0
    for pos, k in enumerate(order):
        while done < steps[k]:
            cur[:, pos:, :] = cur[:, pos:, :] @ vt
            done += 1
    res = np.empty(psi.shape, dtype=complex)
    res[:, order, :] = cur
    return res


def _evolve_hamiltonian(eigs, psi, times):
    e, x = eigs
    coeff = np.einsum("bji,bkj->bki", x.conj(), psi)
    coeff = coeff * np.exp(-1j * e[:, None, :] * times[None, :, None])
    return np.einsum("bij,bkj->bki", x, coeff)


def _final_probabilities(spec, reg, times, seed, indices, design, eta):
    """Born distributions (B, K, D) of every run and time, plus the shot stream."""
    n = reg.n_sites
    k_times = times.size
    kind, ops = _operators(spec, reg, seed, indices)
    us, gens, hs = [], [], []
    for r in indices:
        g = _rng.stream(seed, int(r), "shots")
        us.append(sample_local_unitaries(design, n, g, size=k_times))
        gens.append(g)
        if eta > 0:
            hs.append(noise.sample_local_hermitian(n, _rng.stream(seed, int(r), "decorrelation"),
                                                   size=k_times))
    u = np.array(us)
    psi = product_state(u)
    if kind == "floquet":
        steps = np.rint(times / spec.tau).astype(int)
        psi = _evolve_floquet(ops, psi, steps)
    else:
        psi = _evolve_hamiltonian(ops, psi, times)
    final = noise.decorrelated_rotations(u, np.array(hs) if eta > 0 else None, eta)
    psi = apply_local(psi, final)
    return np.abs(psi) ** 2, gens


def _batch(spec, reg, times, seed, indices, design, depolarization, eta, shots_per_draw):
    d = reg.dim
    k_times = times.size
    probs, gens = _final_probabilities(spec, reg, times, seed, indices, design, eta)
    unif = np.array([g.random((k_times, shots_per_draw)) for g in gens])
    bits = sample_outcomes(probs[:, :, None, :], unif)
    if depolarization > 0:
        coins, junk = [], []
        for r in indices:
            gd = _rng.stream(seed, int(r), "depolarization")
            coins.append(gd.random((k_times, shots_per_draw)))
            junk.append(gd.integers(0, d, size=(k_times, shots_per_draw)))
        alpha = noise.DepolarizationModel(depolarization).alpha(times / spec.tau)
        mixed = np.array(coins) >= alpha[None, :, None]
        bits = np.where(mixed, np.array(junk), bits)
    real = np.broadcast_to(np.asarray(indices)[:, None, None], bits.shape)
    tt = np.broadcast_to(times[None, :, None], bits.shape)
    return real.ravel(), tt.ravel(), bits.ravel()


def _default_batch(reg):
    return max(1, min(1024, BATCH_BYTES // (16 * reg.dim * reg.dim * 4)))


def expected_run_values(spec, reg, times, n_runs, seed, masks, *, design=TwoDesignKind.CLIFFORD,
                        depolarization=0.0, eta=0.0, start=0, batch=None):
    """Born-averaged single-shot value of every run, shape (n_runs, n_times) per mask.

    Each run draws the same disorder, local unitaries and decorrelation
    generators as :func:`simulate_shots`, but the outcome sampling is
    replaced by its exact expectation. Runs stay independent, so the spread
    of these values carries only disorder and unitary fluctuations.
    """
    reg = reg if isinstance(reg, hilbert.SpinRegister) else hilbert.SpinRegister(int(reg))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    masks = [_as_mask(m, reg.n_sites) for m in masks]
    design = TwoDesignKind(design)
    batch = _default_batch(reg) if batch is None else batch
    table = np.array([single_shot_values(np.arange(reg.dim), m) for m in masks])
    alpha = noise.DepolarizationModel(depolarization).alpha(times / spec.tau)
    out = []
    for b0 in range(start, start + n_runs, batch):
        idx = np.arange(b0, min(b0 + batch, start + n_runs))
        probs, _ = _final_probabilities(spec, reg, times, seed, idx, design, eta)
        out.append(probs @ table.T)
    vals = np.concatenate(out)
    res = {}
    for j, m in enumerate(masks):
        res[m] = alpha * vals[:, :, j] + (1 - alpha) / m.d_a ** 2
    return res


def simulate_shots(spec, reg, times, n_shots, seed, *, design=TwoDesignKind.CLIFFORD,
                   depolarization=0.0, eta=0.0, shots_per_draw=1, start=0, batch=None,
                   threads=1):
    """Simulate ``n_shots`` protocol runs at every time of ``times``.

    Each run index has a fresh disorder realization and fresh local
    unitaries per time, and yields ``shots_per_draw`` Born samples (one by
    default). Records are ordered by run index, then time, then repeat.
    """
    reg = reg if isinstance(reg, hilbert.SpinRegister) else hilbert.SpinRegister(int(reg))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    if spec.is_floquet:
        n = times / spec.tau
        if np.any(np.abs(n - np.rint(n)) > 1e-9 * np.maximum(1, n)):
            raise ValueError("Floquet times must be integer multiples of tau")
    if not 0 <= depolarization <= 1:
        raise ValueError("depolarization must lie in [0, 1]")
    if eta < 0:
        raise ValueError("eta must be non-negative")
    design = TwoDesignKind(design)
    if batch is None:
        batch = _default_batch(reg)
    starts = list(range(start, start + n_shots, batch))

    def job(b0):
        idx = np.arange(b0, min(b0 + batch, start + n_shots))
        return _batch(spec, reg, times, seed, idx, design, depolarization, eta, shots_per_draw)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, starts))
    else:
        parts = [job(b0) for b0 in starts]
    cols = [np.concatenate(c) for c in zip(*parts)]
    return ShotSet(reg.n_sites, cols[0], cols[1], cols[2], seed)


def estimate_series(shots, mask=None, n_a=None):
    """Per-time estimates for a mask, or for the average over all size-``n_a`` masks."""
    if (mask is None) == (n_a is None):
        raise ValueError("give exactly one of mask or n_a")
    if mask is not None:
        mask = _as_mask(mask, shots.n_sites)
        values = single_shot_values(shots.bits, mask)
    else:
        values = averaged_shot_values(shots.bits, shots.n_sites, n_a)
        mask = SubsystemMask.middle(shots.n_sites, n_a)
    times = shots.times
    means, errs, counts = [], [], []
    for t in times:
        v = values[np.isclose(shots.time, t, rtol=1e-12, atol=1e-12)]
        means.append(v.mean())
        errs.append(v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else 0.0)
        counts.append(v.size)
    return FormFactorSeries(times, means, mask, errs, "estimated", int(min(counts)))


def rescale_series(series, p, tau, d_a=None):
    """Depolarization-corrected copy of an estimated series (values and errors)."""
    d_a = series.mask.d_a if d_a is None else d_a
    alpha = noise.DepolarizationModel(p).alpha(series.times / tau)
    vals = noise.rescale_psff(series.values, alpha, d_a)
    err = None if series.stderr is None else series.stderr / alpha
    return FormFactorSeries(series.times, vals, series.mask, err, series.provenance,
                            series.n_realizations)
