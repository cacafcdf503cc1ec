import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import reference_params
from lmg_battery.model import BatteryParams, h1_matrix
from lmg_battery.observables import (COLUMNS, COST_RESCALE_DURATION, SubsystemRangeError,
                                     annotate, cumulative_cost, default_subsystem, energy,
                                     entropies, entropy, fluctuation, inst_cost, inst_costs,
                                     max_inst_cost, reduced_density, rescaled_time,
                                     running_cost, schmidt_coefficients, stored_and_power)
from lmg_battery.oracle import compressed_marginal, embed, partial_trace_first
from lmg_battery.propagator import TimeGrid, evolve


def basis(n, k):
    psi = np.zeros(n + 1, dtype=complex)
    psi[k] = 1
    return psi


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def test_energy_examples():
    assert energy(basis(6, 0)) == -3
    assert energy(basis(6, 6)) == 3
    assert energy((basis(2, 0) + basis(2, 2)) / math.sqrt(2)) == pytest.approx(0.0)


def test_fluctuation_examples():
    for k in range(7):
        assert fluctuation(basis(6, k)) == 0.0
    assert fluctuation((basis(2, 0) + basis(2, 2)) / math.sqrt(2)) == pytest.approx(1.0)
    for n in (3, 10, 51):
        ghz = (basis(n, 0) + basis(n, n)) / math.sqrt(2)
        assert fluctuation(ghz) == pytest.approx(n / 2)


def test_stored_and_power():
    t = np.array([0.0, 1.0, 2.0])
    c, p = stored_and_power(t, np.array([-5.0, -3.0, 5.0]))
    np.testing.assert_allclose(c, [0, 2, 10])
    np.testing.assert_allclose(p, [0, 2, 5])
    assert c[-1] == 10  # the fully charged state of N = 10 stores N


def test_zero_coupling_run_stores_nothing():
    params = BatteryParams.build(8, -0.1, 0.0, protocol="constant")
    obs = annotate(evolve(params, TimeGrid(3.0, 300, 10)))
    assert not np.any(obs.stored) and not np.any(obs.power)


def test_schmidt_coefficients_are_normalised():
    for n, na in ((2, 1), (7, 3), (50, 25)):
        c = schmidt_coefficients(n, na)
        for k in range(n + 1):
            diag = [c[ka, k - ka] for ka in range(na + 1) if 0 <= k - ka <= n - na]
            assert sum(x * x for x in diag) == pytest.approx(1.0)


def test_reduced_density_examples():
    rho = reduced_density(basis(6, 0), 2)
    expected = np.zeros((3, 3))
    expected[0, 0] = 1
    np.testing.assert_allclose(rho, expected, atol=1e-14)
    # |1,0> of two spins is a Bell pair
    np.testing.assert_allclose(reduced_density(basis(2, 1), 1), np.eye(2) / 2, atol=1e-14)


def test_reduced_density_matches_full_space():
    rng = np.random.default_rng(3)
    for _ in range(5):
        psi = random_state(rng, 5)
        full = embed(psi)
        np.testing.assert_allclose(reduced_density(psi, 2), compressed_marginal(full, 4, 2),
                                   atol=1e-10)
        p = np.linalg.eigvalsh(partial_trace_first(full, 4, 2))
        p = p[p > 1e-14]
        assert entropy(psi, 2) == pytest.approx(-(p * np.log2(p)).sum(), abs=1e-10)


def test_entropy_examples():
    assert entropy(basis(10, 0), 5) == 0.0
    for n in (2, 6, 30):
        cat = (basis(n, 0) + basis(n, n)) / math.sqrt(2)
        assert entropy(cat, n // 2) == pytest.approx(1.0, abs=1e-12)


def test_entropy_split_range():
    with pytest.raises(SubsystemRangeError):
        entropy(basis(4, 1), 0)
    with pytest.raises(SubsystemRangeError):
        entropy(basis(4, 1), 4)
    assert default_subsystem(1) is None and default_subsystem(9) == 4


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 40), data=st.data())
def test_entropy_swap_symmetry(n, data):
    na = data.draw(st.integers(1, n - 1))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    psi = random_state(rng, n + 1)
    assert entropy(psi, na) == pytest.approx(entropy(psi, n - na), abs=1e-10)
    assert 0 <= entropy(psi, na) <= math.log2(min(na, n - na) + 1) + 1e-12


def test_batched_entropy_matches_single():
    rng = np.random.default_rng(0)
    states = np.array([random_state(rng, 13) for _ in range(4)])
    np.testing.assert_allclose(entropies(states, 5), [entropy(s, 5) for s in states], atol=1e-13)


@pytest.mark.parametrize("n", range(2, 21))
def test_cost_is_commutator_norm(n):
    params = reference_params("sta", n_spins=n)
    h1 = np.asarray(h1_matrix(params.sector, params.gamma))
    rng = np.random.default_rng(n)
    for _ in range(100):
        t = rng.uniform(0, 2)
        psi = random_state(rng, n + 1)
        rate = 25 * math.cos(5 * t)
        rho = np.outer(psi, psi.conj())
        dh = rate * h1
        direct = np.linalg.norm(dh @ rho - rho @ dh)
        assert inst_cost(params, t, psi) == pytest.approx(direct, abs=1e-10)


def test_cost_vanishes_without_rate():
    psi = random_state(np.random.default_rng(1), 11)
    assert inst_cost(reference_params("constant", n_spins=10), 0.4, psi) == 0.0
    assert inst_cost(reference_params("sta", n_spins=10), math.pi / 10, psi) < 1e-12


def test_cumulative_cost_edge_cases():
    params = reference_params("constant", n_spins=10)
    traj = evolve(params, TimeGrid(2.0, 200, 10))
    assert cumulative_cost(traj) == 0.0
    assert max_inst_cost(traj) == (0.0, 0.0)
    assert running_cost(np.array([0.0]), np.array([3.0]))[0] == 0.0


def test_max_inst_cost_bounds_series(reference_runs):
    traj, _ = reference_runs["sta"]
    t_star, value = max_inst_cost(traj)
    assert np.all(traj.observables.inst_cost <= value)
    assert traj.observables.inst_cost[np.searchsorted(traj.times, t_star)] == value


def test_fine_cost_independent_of_sampling():
    params = reference_params("sta", n_spins=12)
    a = evolve(params, TimeGrid(2 * math.pi / 5, 2000, 10))
    b = evolve(params, TimeGrid(2 * math.pi / 5, 2000, 5))
    assert cumulative_cost(a) == pytest.approx(cumulative_cost(b), rel=1e-12)
    # and it agrees with a trapezoid over densely stored samples
    dense = evolve(params, TimeGrid(2 * math.pi / 5, 2000, 1))
    coarse_trap = running_cost(dense.times, inst_costs(params, dense.times, dense.states))[-1]
    assert cumulative_cost(a) == pytest.approx(coarse_trap, rel=1e-5)


@pytest.mark.slow
def test_cumulative_cost_converges(reference_runs):
    traj, _ = reference_runs["sta"]
    g = traj.grid
    fine = evolve(traj.params, TimeGrid(g.t_end, 2 * g.n_steps, 2 * g.sample_stride))
    ref = cumulative_cost(traj)
    assert abs(cumulative_cost(fine) - ref) < 1e-6 * ref


def test_bounds_on_reference_runs(reference_runs):
    for traj, _ in reference_runs.values():
        obs = traj.observables
        n = traj.params.n_spins
        assert np.all(obs.stored >= -1e-12) and np.all(obs.stored <= n + 1e-12)
        assert np.all(obs.fluctuation >= 0) and np.all(obs.fluctuation <= n / 2 + 1e-12)


def test_series_columns(reference_runs):
    traj, _ = reference_runs["sinusoid"]
    cols = traj.observables.as_columns()
    assert tuple(cols) == COLUMNS
    rec = next(iter(traj.observables.records()))
    assert rec.t == 0.0 and rec.stored == 0.0 and rec.power == 0.0


def test_rescaled_time():
    assert rescaled_time(COST_RESCALE_DURATION) == pytest.approx(1.0)
    np.testing.assert_allclose(rescaled_time([0.0, 0.3 * math.pi]), [0.0, 1.0])
