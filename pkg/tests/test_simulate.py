import numpy as np
import pytest

from psff import hilbert, protocol, simulate, spectral
from psff.spectral import SubsystemMask

from conftest import SEED

SPEC = hilbert.ModelSpec("floquet_v3")


def test_shots_do_not_depend_on_batch_or_threads():
    times = np.array([0, 1, 3]) * SPEC.tau
    ref = simulate.simulate_shots(SPEC, 3, times, 40, SEED)
    for batch, threads in ((1, 1), (7, 1), (7, 3), (64, 2)):
        got = simulate.simulate_shots(SPEC, 3, times, 40, SEED, batch=batch, threads=threads)
        assert got == ref


def test_start_offset_continues_the_run_sequence():
    times = np.array([2.0]) * SPEC.tau
    full = simulate.simulate_shots(SPEC, 3, times, 30, SEED)
    tail = simulate.simulate_shots(SPEC, 3, times, 10, SEED, start=20)
    assert np.array_equal(full.bits[20:], tail.bits)
    assert np.array_equal(full.realization[20:], tail.realization)


def test_record_layout():
    times = np.array([1.0, 2.0]) * SPEC.tau
    s = simulate.simulate_shots(SPEC, 2, times, 5, SEED, shots_per_draw=3)
    assert len(s) == 30
    assert list(s.realization[:6]) == [0] * 6
    assert np.allclose(s.time[:6], np.repeat(times, 3))


def test_time_zero_always_returns_the_zero_string():
    s = simulate.simulate_shots(SPEC, 4, [0.0], 200, SEED, design="haar")
    assert np.all(s.bits == 0)
    assert simulate.estimate_series(s, mask="1111").values[0] == 1.0


@pytest.mark.parametrize("kwargs", [
    {"n_shots": 0},
    {"times": [-1.0]},
    {"times": [0.5]},
    {"depolarization": 1.5},
    {"eta": -0.1},
])
def test_validation(kwargs):
    args = {"times": [SPEC.tau], "n_shots": 2}
    args.update(kwargs)
    with pytest.raises(ValueError):
        simulate.simulate_shots(SPEC, 2, args.pop("times"), args.pop("n_shots"), SEED, **args)


def test_expected_run_values_match_shot_estimates():
    times = np.array([1.0, 4.0]) * SPEC.tau
    mask = SubsystemMask.middle(3, 2)
    n = 3000
    exact = simulate.expected_run_values(SPEC, 3, times, n, SEED, [mask])[mask]
    shots = simulate.simulate_shots(SPEC, 3, times, n, SEED)
    est = simulate.estimate_series(shots, mask=mask)
    assert np.all(np.abs(est.values - exact.mean(axis=0)) < 4 * est.stderr)


def test_expected_run_values_average_to_the_exact_ensemble():
    times = np.array([1.0, 2.0, 6.0]) * SPEC.tau
    mask = SubsystemMask.from_bitstring("101")
    n = 400
    runs = simulate.expected_run_values(SPEC, 3, times, n, SEED, [mask])[mask]
    ens = spectral.sample_ensemble(SPEC, 3, [mask], times, n, SEED).series(mask)
    err = runs.std(axis=0, ddof=1) / np.sqrt(n)
    assert np.all(np.abs(runs.mean(axis=0) - ens.values) < 4 * err + 4 * ens.stderr)


def test_rmt_hamiltonian_shots_run():
    spec = hilbert.ModelSpec("rmt", ensemble="GUE")
    s = simulate.simulate_shots(spec, 2, [0.0, 0.5, 3.0], 20, SEED)
    assert len(s) == 60 and s.n_sites == 2


def test_estimate_series_arguments():
    s = simulate.simulate_shots(SPEC, 2, [SPEC.tau], 10, SEED)
    with pytest.raises(ValueError):
        simulate.estimate_series(s)
    with pytest.raises(ValueError):
        simulate.estimate_series(s, mask="11", n_a=2)
    avg = simulate.estimate_series(s, n_a=2)
    assert avg.values[0] == simulate.estimate_series(s, mask="11").values[0]


def test_rescale_series_undoes_known_depolarization():
    times = np.array([0.0, 1.0, 5.0]) * SPEC.tau
    mask = SubsystemMask.full(2)
    p = 0.1
    alpha = 0.9 ** np.array([0, 1, 5])
    series = spectral.FormFactorSeries(times, alpha * 0.3 + (1 - alpha) / 16, mask,
                                       np.full(3, 0.01), "estimated", 10)
    back = simulate.rescale_series(series, p, SPEC.tau)
    assert np.allclose(back.values, 0.3, atol=1e-14)
    assert np.allclose(back.stderr, 0.01 / alpha)


def test_depolarized_shots_match_closed_form():
    times = np.array([3.0]) * SPEC.tau
    mask = SubsystemMask.full(2)
    n = 20_000
    clean = simulate.expected_run_values(SPEC, 2, times, n, SEED, [mask])[mask].mean()
    shots = simulate.simulate_shots(SPEC, 2, times, n, SEED, depolarization=0.2)
    est = protocol.estimate_psff(shots, mask)
    a = 0.8 ** 3
    assert abs(est.mean - (a * clean + (1 - a) / 16)) < 4 * est.stderr
