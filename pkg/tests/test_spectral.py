import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psff import hilbert, rmt, spectral
from psff.spectral import FormFactorSeries, SubsystemMask

from conftest import SEED


def partial_trace_oracle(op, n, sites_a):
    """tr_A by explicit sum over basis states of A (independent index bookkeeping)."""
    b_sites = [s for s in range(1, n + 1) if s not in sites_a]
    d_b = 2 ** len(b_sites)
    out = np.zeros((d_b, d_b), dtype=complex)

    def index(bits_a, bits_b):
        full = [0] * n
        for s, v in zip(sites_a, bits_a):
            full[s - 1] = v
        for s, v in zip(b_sites, bits_b):
            full[s - 1] = v
        return int("".join(map(str, full)), 2) if n else 0

    def bits(k, width):
        return [int(c) for c in format(k, f"0{width}b")] if width else []

    for ka in range(2 ** len(sites_a)):
        for i in range(d_b):
            for j in range(d_b):
                out[i, j] += op[index(bits(ka, len(sites_a)), bits(i, len(b_sites))),
                                index(bits(ka, len(sites_a)), bits(j, len(b_sites)))]
    return out


masks_strategy = st.integers(1, 4).flatmap(
    lambda n: st.tuples(st.just(n), st.sets(st.integers(1, n))))


def test_mask_construction_and_dimensions():
    m = SubsystemMask.from_bitstring("0110")
    assert m.sites == {2, 3} and m.n_a == 2 and m.d_a * m.d_b == m.dim == 16
    assert m.bits == 0b0110 and str(m) == "0110"
    assert SubsystemMask.from_int(4, 0b0110) == m
    assert SubsystemMask.middle(6, 3).bitstring == "011100"
    assert SubsystemMask.full(3).complement() == SubsystemMask.empty(3)
    assert len(list(SubsystemMask.full(3).subsets())) == 8


@pytest.mark.parametrize("bad", ["", "012", "ab"])
def test_mask_rejects_bad_bitstrings(bad):
    with pytest.raises(ValueError):
        SubsystemMask.from_bitstring(bad)


def test_mask_rejects_out_of_range_sites():
    with pytest.raises(ValueError):
        SubsystemMask(3, frozenset({4}))


@given(masks_strategy)
@settings(max_examples=40, deadline=None)
def test_trace_out_matches_index_oracle(args):
    n, sites = args
    g = np.random.default_rng(SEED + n)
    op = g.standard_normal((2 ** n, 2 ** n)) + 1j * g.standard_normal((2 ** n, 2 ** n))
    mask = SubsystemMask(n, frozenset(sites))
    got = spectral.trace_out(op, mask)
    want = partial_trace_oracle(op, n, sorted(sites))
    assert np.allclose(got, want, atol=1e-12)


def test_sff_single_examples():
    assert spectral.sff_single(np.eye(4)) == 1.0
    assert spectral.sff_single(hilbert.SIGMA_Z) == 0.0
    assert spectral.sff_single(np.diag([1, 1j])) == pytest.approx(0.5, abs=1e-15)


@given(masks_strategy)
@settings(max_examples=30, deadline=None)
def test_psff_single_bounds_and_limits(args):
    n, sites = args
    u = rmt.haar_unitary(2 ** n, np.random.default_rng(len(sites) + 10 * n))
    mask = SubsystemMask(n, frozenset(sites))
    k = spectral.psff_single(u, mask)
    assert -1e-15 <= k <= 1 + 1e-12
    assert spectral.psff_single(np.eye(2 ** n), mask) == pytest.approx(1.0, abs=1e-13)
    assert spectral.psff_single(u, SubsystemMask.empty(n)) == pytest.approx(1.0, abs=1e-12)
    full = SubsystemMask.full(n)
    assert spectral.psff_single(u, full) == pytest.approx(spectral.sff_single(u), abs=1e-12)


def test_eigen_decompose_examples():
    e = spectral.eigen_decompose(hilbert.SIGMA_Z).energies
    assert np.allclose(e, [-1, 1])
    v = np.diag(np.exp(-1j * np.array([2.9, 0.3])))
    assert np.allclose(spectral.eigen_decompose(v, tau=1.0).energies, [0.3, 2.9])


def test_eigen_decompose_residuals_on_gue(rng):
    h = rmt.sample("GUE", 64, rng)
    data = spectral.eigen_decompose(h)
    assert np.max(np.abs(h @ data.vectors - data.vectors * data.energies)) < 1e-10
    assert np.all(np.diff(data.energies) >= 0)


def test_quasi_energies_in_branch_and_reconstruct(rng):
    tau = 0.8
    u = rmt.haar_unitary(32, rng)
    data = spectral.eigen_decompose(u, tau=tau)
    assert np.all((data.energies >= 0) & (data.energies < 2 * np.pi / tau))
    for n in (1, 3):
        assert np.allclose(data.evolution(n * tau), np.linalg.matrix_power(u, n), atol=1e-9)


def test_eigen_decompose_rejects_bad_input(rng):
    with pytest.raises(hilbert.OperatorKindError):
        spectral.eigen_decompose(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        spectral.eigen_decompose(np.eye(2), tau=0.0)


def test_degenerate_levels_are_logged(caplog):
    with caplog.at_level(logging.WARNING, logger="psff.spectral"):
        spectral.eigen_decompose(np.diag([0.0, 0.0, 1.0]))
    assert "near-degenerate" in caplog.text


def test_reduced_density_examples():
    zero = np.zeros(8)
    zero[0] = 1
    rho = spectral.reduced_density(zero, SubsystemMask.from_bitstring("010"))
    assert np.allclose(rho, np.diag([1, 0, 0, 0]))
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(spectral.reduced_density(bell, "10"), np.eye(2) / 2)


@given(masks_strategy)
@settings(max_examples=30, deadline=None)
def test_schmidt_symmetry_of_purities(args):
    n, sites = args
    g = np.random.default_rng(n * 31 + len(sites))
    psi = g.standard_normal(2 ** n) + 1j * g.standard_normal(2 ** n)
    psi /= np.linalg.norm(psi)
    mask = SubsystemMask(n, frozenset(sites))
    rho_b = spectral.reduced_density(psi, mask)
    rho_a = spectral.reduced_density(psi, mask.complement())
    assert np.trace(rho_b).real == pytest.approx(1.0, abs=1e-12)
    assert np.min(np.linalg.eigvalsh(rho_b)) > -1e-10
    assert np.trace(rho_b @ rho_b).real == pytest.approx(np.trace(rho_a @ rho_a).real, abs=1e-10)


@pytest.mark.parametrize("bits", ["0001", "0110", "1110", "1111", "0000"])
def test_gram_paths_and_trace_path_agree(bits):
    mask = SubsystemMask.from_bitstring(bits)
    u = rmt.haar_unitary(16, np.random.default_rng(SEED))
    data = spectral.eigen_decompose(u, tau=1.0)
    gram = spectral.overlap_gram(data, mask)
    rho = spectral.reduced_density(data.vectors, mask)
    direct = np.einsum("ibc,jcb->ij", rho, rho).real
    assert np.allclose(gram, direct, atol=1e-12)
    times = np.arange(6.0)
    fast = spectral.psff_from_gram(data, gram, mask, times)
    slow = [spectral.psff_single(np.linalg.matrix_power(u, int(t)), mask) for t in times]
    assert np.allclose(fast, slow, atol=1e-12)


def test_diagonal_hamiltonian_has_pure_reduced_states():
    h = np.diag([0.1, 0.5, 0.9, 1.7])
    d = spectral.purity_and_overlaps(spectral.eigen_decompose(h), "10")
    assert d.P_B == pytest.approx(1.0)
    assert d.delta_P_B == pytest.approx(d.P_B - d.Q_B)
    assert d.Delta_P_B == pytest.approx(d.Q_B - 0.5)


def test_diagnostics_average():
    m = SubsystemMask.from_bitstring("10")
    items = [spectral.EthDiagnostics(0.8, 0.4, m), spectral.EthDiagnostics(0.6, 0.2, m)]
    avg = spectral.EthDiagnostics.average(items)
    assert avg.P_B == pytest.approx(0.7) and avg.Q_B == pytest.approx(0.3)
    assert avg.n_realizations == 2 and avg.P_B_stderr == pytest.approx(0.1)
    with pytest.raises(ValueError):
        spectral.EthDiagnostics.average([])


def test_series_validation():
    m = SubsystemMask.full(2)
    with pytest.raises(ValueError):
        FormFactorSeries([0, 1], [1.0], m)
    with pytest.raises(ValueError):
        FormFactorSeries([0, 1], [1.0, 0.5], m, stderr=[-1.0, 0.0])
    with pytest.raises(ValueError):
        FormFactorSeries([0], [1.0], m, provenance="guessed")
    s = FormFactorSeries([0, 1.5], [1.0, 0.5], m)
    assert s.at(1.5) == 1
    with pytest.raises(KeyError):
        s.at(2.0)


def test_single_realization_ensemble_reproduces_single_values():
    spec = hilbert.ModelSpec("floquet_v3")
    masks = [SubsystemMask.from_bitstring(b) for b in ("010", "111")]
    times = np.arange(4) * spec.tau
    out = spectral.ensemble_form_factor(spec, 3, masks, times, 1, SEED)
    v = hilbert.build_model(spec, 3, SEED, 0)[0]
    for m in masks:
        want = [spectral.psff_single(np.linalg.matrix_power(v, k), m) for k in range(4)]
        assert np.allclose(out[m].values, want, atol=1e-12)
        assert out[m].values[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("variant", ["floquet_v2", "ising"])
def test_spectral_and_trace_methods_agree(variant):
    spec = hilbert.ModelSpec(variant)
    masks = [SubsystemMask.middle(4, 2), SubsystemMask.full(4)]
    times = np.arange(5) * spec.tau
    a = spectral.sample_ensemble(spec, 4, masks, times, 3, SEED)
    b = spectral.sample_ensemble(spec, 4, masks, times, 3, SEED, method="trace")
    for m in masks:
        assert np.allclose(a.psff[m], b.psff[m], atol=1e-12)


def test_ensemble_does_not_depend_on_thread_count():
    spec = hilbert.ModelSpec("floquet_v3")
    masks = [SubsystemMask.middle(4, 2)]
    times = np.arange(6) * spec.tau
    a = spectral.sample_ensemble(spec, 4, masks, times, 8, SEED)
    b = spectral.sample_ensemble(spec, 4, masks, times, 8, SEED, threads=3)
    assert np.array_equal(a.psff[masks[0]], b.psff[masks[0]])
    assert np.array_equal(a.gap_ratio, b.gap_ratio)


def test_ensemble_rejects_bad_arguments():
    spec = hilbert.ModelSpec("floquet_v3")
    with pytest.raises(ValueError):
        spectral.sample_ensemble(spec, 3, ["111"], [0.0], 0, SEED)
    with pytest.raises(ValueError):
        spectral.sample_ensemble(spec, 3, ["111"], [0.5], 1, SEED)
    with pytest.raises(ValueError):
        spectral.sample_ensemble(spec, 3, ["111"], [0.0], 1, SEED, method="magic")


def test_cue_ensemble_at_eight_periods():
    spec = hilbert.ModelSpec("rmt", ensemble="CUE")
    m = SubsystemMask.full(4)
    s = spectral.ensemble_form_factor(spec, 4, [m], [8.0], 2000, SEED)[m]
    want = rmt.sff_analytic("CUE", rmt.AnalyticParams(16, 16.0), 8.0)
    assert abs(s.values[0] - want) < 3 * s.stderr[0]


def test_cue_plateau_equals_purity_over_subsystem_dimension():
    spec = hilbert.ModelSpec("rmt", ensemble="CUE")
    m = SubsystemMask.middle(4, 2)
    times = np.arange(64, 129, dtype=float)
    s = spectral.sample_ensemble(spec, 4, [m], times, 500, SEED)
    diff = s.psff[m].mean(axis=1) - s.purity[m] / m.d_a
    assert abs(diff.mean()) < 3 * diff.std(ddof=1) / np.sqrt(diff.size)


def test_gap_ratio_examples():
    assert spectral.gap_ratio_mean(np.arange(10.0)) == pytest.approx(1.0)
    assert np.allclose(spectral.gap_ratios([0.0, 1.0, 3.0, 3.5]), [0.5, 0.25])
    assert np.allclose(spectral.gap_ratios([0.0, 1.0, 1.0, 2.0]), [0.0, 0.0])
    with pytest.raises(ValueError):
        spectral.gap_ratios([0.0, 1.0])


def test_gap_ratio_skips_doubly_degenerate_pairs(caplog):
    with caplog.at_level(logging.WARNING, logger="psff.spectral"):
        r = spectral.gap_ratios([0.0, 1.0, 1.0, 1.0, 3.0])
    assert np.allclose(r, [0.0, 0.0])
    assert "degenerate" in caplog.text


def test_linear_fit_recovers_line():
    t = np.linspace(0, 10, 21)
    slope, icpt, err, r2 = spectral.linear_fit(t, 0.3 * t + 2)
    assert slope == pytest.approx(0.3) and icpt == pytest.approx(2.0)
    assert err == pytest.approx(0.0, abs=1e-12) and r2 == pytest.approx(1.0)


def test_ramp_window_found_on_synthetic_curve():
    t = np.arange(0.0, 100.0)
    y = np.where(t < 5, 1.0 - 0.19 * t, np.minimum(0.05 + 0.01 * (t - 5), 0.5))
    s = FormFactorSeries(t, y, SubsystemMask.full(2))
    fit = spectral.detect_ramp_window(s, t_max=50)
    assert fit.slope == pytest.approx(0.01, rel=1e-9)
    assert fit.start >= 5 and fit.stop <= 50
    with pytest.raises(ValueError):
        spectral.detect_ramp_window(FormFactorSeries(t, -t, SubsystemMask.full(2)))


def test_sample_slopes_mean_and_error():
    t = np.arange(10.0)
    samples = np.array([0.1 * t, 0.3 * t])
    mean, err = spectral.sample_slopes(t, samples, 2, 8)
    assert mean == pytest.approx(0.2) and err == pytest.approx(0.1)


def test_shift_extract():
    t = np.arange(0.0, 40.0)
    m = SubsystemMask.full(2)
    k = FormFactorSeries(t, 0.01 * t + 0.1, m)
    k_a = FormFactorSeries(t, 0.01 * t + 0.15, SubsystemMask.from_bitstring("10"))
    assert spectral.shift_extract(k_a, k, 20.0) == pytest.approx(0.05)
    assert spectral.shift_extract(k, k, 3.0) == 0.0
    assert spectral.shift_extract(k_a, k) == pytest.approx(0.05)
    with pytest.raises(KeyError):
        spectral.shift_extract(k_a, k, 2.5)


def test_cue_analytic_shift_close_to_inverse_square_dimension():
    p = rmt.AnalyticParams(64, 64.0)
    t0 = 16.0
    shift = rmt.psff_analytic("CUE", p, 8, 8, t0) - rmt.sff_analytic("CUE", p, t0)
    assert shift == pytest.approx(1 / 64, rel=0.1)


def test_thouless_time():
    t = np.arange(10.0)
    ref = np.ones(10)
    vals = np.array([3, 2, 1.1, 1.5, 1.05, 1.0, 0.95, 1.0, 1.0, 1.0])
    assert spectral.thouless_time(FormFactorSeries(t, vals, SubsystemMask.full(1)), ref) == 4.0
    assert spectral.thouless_time(FormFactorSeries(t, 3 * ref, SubsystemMask.full(1)), ref) is None


def test_eth_prediction_limits():
    d, d_a, d_b, t_h = 64, 8, 8, 64.0
    gamma = 2 * np.pi * d / t_h
    ramp = spectral.eth_prediction(0.1, 0.0, 2, gamma, d, d_a, d_b, t_h, 20.0)
    assert ramp == pytest.approx(0.1 / d_a + 20.0 / (d * t_h))
    plateau = spectral.eth_prediction(0.1, 0.0, 2, gamma, d, d_a, d_b, t_h, 200.0)
    assert plateau == pytest.approx(0.1 / d_a + 1 / d)
    with pytest.raises(ValueError):
        spectral.eth_prediction(0.1, 0.0, 3, gamma, d, d_a, d_b, t_h, 1.0)


def test_eth_prediction_against_rmt_plateau():
    d_a = d_b = 8
    d = 64
    p, q = rmt.pq_analytic("unitary", d_a, d_b)
    eth = spectral.eth_prediction(p - q, q - 1 / d_b, 2, 1.0, d, d_a, d_b, 64.0, 1e4)
    exact = rmt.psff_analytic("CUE", rmt.AnalyticParams(d, 64.0), d_a, d_b, 1e4)
    assert abs(eth - exact) < 2 / d


def test_spectrum_rescale():
    e = np.array([0.0, 1.0, 2.0, 3.0])
    assert np.allclose(spectral.spectrum_rescale(e, 1.0), e)
    assert np.allclose(np.diff(spectral.spectrum_rescale(2 * e, 1.0)), 1.0)
    with pytest.raises(ValueError):
        spectral.spectrum_rescale(np.ones(3), 1.0)
    with pytest.raises(ValueError):
        spectral.spectrum_rescale(e, 0.0)
