import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import n_sweep, reference_params
from lmg_battery.analysis import (GridSettings, NoCrossingFound, NonPositiveDataError, SweepSpec,
                                  SweepTable, compare_protocols, entropy_fluctuation_correlation,
                                  find_crossings, fit_power_law, fit_scaling, local_minima,
                                  maxima_of, refine_maximum, run_protocol, sweep, threshold_scan)
from lmg_battery.model import BatteryParams
from lmg_battery.observables import annotate
from lmg_battery.propagator import TimeGrid, evolve, ground_state_track
from lmg_battery.spin import build_sz

SHORT = GridSettings(periods=2, steps_per_period=400, constant_t_end=5.0)


def test_zero_coupling_has_no_maxima():
    params = BatteryParams.build(10, -0.1, 0.0, protocol="constant")
    _, rec = run_protocol(params, TimeGrid(5.0, 500, 5))
    assert rec.c_max == 0.0 and rec.p_max == 0.0


def test_sta_maximum_from_ground_states(reference_runs):
    traj, rec = reference_runs["sta"]
    params = traj.params
    sz = build_sz(params.sector)
    ts = np.linspace(0, 2 * math.pi / 5, 2001)
    adiabatic = max(np.vdot(g, sz @ g).real for g in (ground_state_track(params, t) for t in ts))
    assert rec.c_max == pytest.approx(adiabatic + params.n_spins / 2, abs=1e-3)


@pytest.mark.parametrize("n", [2, 3])
def test_constant_maxima_stable_once_recurrent(n):
    # the initial state spans two levels here, so the motion is exactly periodic
    params = BatteryParams.build(n, -0.1, 5.0, protocol="constant")
    _, a = run_protocol(params, TimeGrid(20.0, 20000, 10))
    _, b = run_protocol(params, TimeGrid(40.0, 40000, 10))
    assert b.c_max == pytest.approx(a.c_max, abs=1e-6)
    assert b.dw_max == pytest.approx(a.dw_max, abs=1e-6)
    assert b.p_max == pytest.approx(a.p_max, abs=1e-6)


def test_compare_with_itself_gives_unit_ratios():
    cmp = compare_protocols(6, -0.1, 5, 5, protocols=("sta",), baseline="sta", settings=SHORT)
    assert cmp.ratios["sta"] == {"C_max": 1.0, "P_max": 1.0, "dW_max": 1.0}


def test_ratios_stable_under_sample_stride():
    coarse = compare_protocols(20, -0.1, 5, 5, settings=GridSettings(sample_stride=20))
    fine = compare_protocols(20, -0.1, 5, 5, settings=GridSettings(sample_stride=5))
    for proto, ratios in fine.ratios.items():
        for key, value in ratios.items():
            assert coarse.ratios[proto][key] == pytest.approx(value, abs=1e-3)


def test_single_value_sweep_equals_run():
    spec = SweepSpec("A", (4.0,), n_spins=8, protocols=("sta",), settings=SHORT)
    row = sweep(spec).rows[0]
    params = spec.point("sta", 4.0)
    _, rec = run_protocol(params, SHORT.grid_for(params.drive), with_entropy=False)
    assert row.maxima == rec and row.error == ""


def test_sweep_is_deterministic_and_ordered():
    spec = SweepSpec("N", (6, 5, 3), settings=SHORT)  # descending input, ascending output
    a, b = sweep(spec), sweep(spec, workers=2)
    assert [(r.protocol, r.value) for r in a.rows] == [
        (p, v) for p in ("constant", "sinusoid", "sta") for v in (3, 5, 6)]
    assert a == b


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("lambda", (1, 2))
    with pytest.raises(ValueError):
        SweepSpec("N", (3, 5, 4))
    with pytest.raises(ValueError):
        SweepSpec("N", (2.5, 3))
    with pytest.raises(ValueError):
        SweepSpec("A", ())


def test_sweep_records_failed_points():
    spec = SweepSpec("omega", (0.0, 5.0), n_spins=4, protocols=("sta",), settings=SHORT)
    table = sweep(spec)
    assert table.rows[0].maxima is None and "frequency" in table.rows[0].error
    assert table.rows[1].error == ""


def test_sta_c_max_grows_with_n():
    x, y = n_sweep(-0.1, 5.0, 5.0).series("sta", "C_max")
    assert np.all(np.diff(y) > 0)


@pytest.mark.slow
def test_sta_energy_insensitive_to_frequency():
    spec = SweepSpec("omega", (2.0, 4.0, 6.0, 8.0, 10.0), protocols=("sta",))
    _, c = sweep(spec).series("sta", "C_max")
    assert np.ptp(c) / np.mean(c) < 0.1


def test_fit_exact_power_law():
    n = np.arange(3, 51)
    fit = fit_power_law(n, 7 * n ** 1.3)
    assert fit.exponent == pytest.approx(1.3, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.n_points == 48


@settings(max_examples=50, deadline=None)
@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_fit_invariant_under_scaling(scale, seed):
    rng = np.random.default_rng(seed)
    n = np.arange(3, 30)
    q = n ** 0.7 * np.exp(rng.normal(scale=0.1, size=n.size))
    a, b = fit_power_law(n, q), fit_power_law(n, scale * q)
    assert b.exponent == pytest.approx(a.exponent, abs=1e-12)
    assert b.intercept == pytest.approx(a.intercept + math.log(scale), abs=1e-9)


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_power_law([3, 4, 5], [1, 2, 3])
    with pytest.raises(NonPositiveDataError):
        fit_power_law([3, 4, 5, 6], [1, 0, 3, 4])
    with pytest.raises(ValueError):
        fit_scaling(SweepTable("A", []))


def test_fit_respects_range():
    n = np.arange(3, 101)
    q = np.where(n <= 50, n ** 0.5, 50 ** 0.5 * (n / 50.0) ** 2)
    assert fit_power_law(n, q, (3, 50)).exponent == pytest.approx(0.5, abs=1e-12)


def test_crossings():
    a = np.linspace(1, 10, 19)
    assert find_crossings(a, a - 4) == [4.0]
    assert find_crossings(a, 2 * a - 9) == [pytest.approx(4.5)]
    assert find_crossings(a, np.ones_like(a)) == []


def _synthetic_table(diff):
    from lmg_battery.analysis import MaximaRecord, SweepRow

    a = np.linspace(1, 10, 37)
    rows = []
    for proto, offset in (("constant", 0.0), ("sta", 1.0)):
        for v, d in zip(a, diff(a)):
            q = 10 + offset * d
            rows.append(SweepRow(proto, "A", float(v), MaximaRecord(q, 0, q, 0, 0, 0, 0, 0)))
    return SweepTable("A", rows)


def test_threshold_scan_synthetic():
    found = threshold_scan(_synthetic_table(lambda a: 4 - a))
    assert found["C_max"] == [pytest.approx(4.0)] and found["P_max"] == [pytest.approx(4.0)]
    with pytest.raises(NoCrossingFound):
        threshold_scan(_synthetic_table(lambda a: a + 1))


@settings(max_examples=50)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_refined_maximum_never_below_grid(values):
    t = np.arange(len(values), dtype=float)
    _, best = refine_maximum(t, values)
    assert best >= max(values)


def test_refined_maximum_recovers_parabola():
    t = np.linspace(0, 1, 11)
    t_star, peak = refine_maximum(t, 3 - (t - 0.43) ** 2)
    assert t_star == pytest.approx(0.43) and peak == pytest.approx(3.0)


def test_local_minima():
    t = np.linspace(0, 10, 1001)
    assert local_minima(t, np.full_like(t, 2.0)).size == 0
    got = local_minima(t, np.cos(2 * np.pi * t / 2.5))
    np.testing.assert_allclose(got, [1.25, 3.75, 6.25, 8.75], atol=1e-9)


def test_correlation_synthetic():
    from lmg_battery.observables import ObservableSeries
    from lmg_battery.propagator import Trajectory

    t = np.linspace(0, 10, 1001)
    y = 2 + np.cos(2 * np.pi * t / 2.5)
    zeros = np.zeros_like(t)
    traj = Trajectory(None, None, t, None,
                      ObservableSeries(t, zeros, zeros, zeros, y, 0.5 * y, zeros, zeros))
    pairing = entropy_fluctuation_correlation(traj)
    assert pairing.fluctuation_minima.size == 4
    assert pairing.max_offset == 0.0


def test_correlation_constant_series():
    params = BatteryParams.build(4, -0.1, 0.0, protocol="constant")
    traj = evolve(params, TimeGrid(2.0, 200, 10))
    annotate(traj)
    pairing = entropy_fluctuation_correlation(traj)
    assert pairing.fluctuation_minima.size == 0 and pairing.offsets.size == 0
