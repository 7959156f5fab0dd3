import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastiq.dataio import PERIODS_PER_DAY
from elastiq.errors import ConfigurationError, InfeasibleError
from elastiq.market import (
    ConsumerSpec,
    ForecasterSpec,
    JobSpec,
    PriceProcessSpec,
    ThermalParams,
    builtin_scenario,
    consumer_decide,
    fit_forecaster,
    load_scenario,
    oracle_at,
    plain_forecast,
    rolling_forecast,
    run_scenario,
    simulate,
    synth_prices,
)
from elastiq.market import _thermal_py, kernels
from elastiq.market.consumers import DT_HOURS, initial_state, place_job
from elastiq.market.scenario import Scenario, read_oracle_csv, write_oracle_csv

FLAT = np.ones(PERIODS_PER_DAY)


def constant_forecaster(price=40.0, **kw):
    return fit_forecaster(np.full(2 * PERIODS_PER_DAY, price), ForecasterSpec(**kw))


# -- prices --------------------------------------------------------------------


def test_deterministic_limit_is_mean_times_diurnal():
    spec = PriceProcessSpec(mean=37.5, volatility=0.0, spike_intensity=0.0, seed=3)
    series = synth_prices(spec, 4)
    assert np.array_equal(series.prices, 37.5 * np.tile(spec.diurnal, 4))
    assert not series.spikes.any()


def test_same_seed_same_series():
    a = synth_prices(PriceProcessSpec(seed=11), 10)
    b = synth_prices(PriceProcessSpec(seed=11), 10)
    c = synth_prices(PriceProcessSpec(seed=12), 10)
    assert np.array_equal(a.prices, b.prices) and np.array_equal(a.spikes, b.spikes)
    assert not np.array_equal(a.prices, c.prices)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_spike_fraction_monte_carlo(seed):
    # threshold from the first half, counted on the held-out second half
    prices = synth_prices(PriceProcessSpec(spike_intensity=0.0035, seed=seed), 365).prices
    half = len(prices) // 2
    thr = np.quantile(prices[:half], 0.95)
    frac = np.mean(prices[half:] >= thr)
    assert 0.03 <= frac <= 0.07


def test_invalid_price_spec():
    with pytest.raises(ConfigurationError):
        PriceProcessSpec(mean=0.0)
    with pytest.raises(ConfigurationError):
        PriceProcessSpec(spike_intensity=1.5)
    with pytest.raises(ConfigurationError):
        PriceProcessSpec(diurnal=-FLAT)


# -- forecaster ----------------------------------------------------------------


def test_constant_history_is_a_fixed_point():
    state = constant_forecaster(42.0)
    history = np.full(50, 42.0)
    assert np.array_equal(rolling_forecast(history, 30, state), np.full(8, 42.0))


def test_threshold_is_95th_percentile():
    prices = synth_prices(PriceProcessSpec(seed=4), 20).prices
    state = fit_forecaster(prices)
    assert state.threshold == np.quantile(prices, 0.95)


def _spiky_history(age, state, n=200):
    r = np.random.default_rng(age)
    history = 40.0 + r.normal(0.0, 1.0, n)
    t = n - 1
    history = np.minimum(history, state.threshold - 1.0)
    history[t - age] = state.threshold * 3.0
    return history, t


def test_elevated_forecast_dominates_plain_after_spike():
    prices = synth_prices(PriceProcessSpec(seed=5), 20).prices
    state = fit_forecaster(prices, ForecasterSpec(elevation_factor=2.5, half_life=4.0))
    for age in range(state.max_age + 1):
        history, t = _spiky_history(age, state)
        plain = plain_forecast(history, t, state)
        assert np.all(rolling_forecast(history, t, state) >= plain)


def test_elevation_decays_geometrically():
    prices = synth_prices(PriceProcessSpec(seed=6), 20).prices
    F, h = 3.0, 4
    state = fit_forecaster(prices, ForecasterSpec(elevation_factor=F, half_life=h))
    expected = {0: F, h: F**0.5, 2 * h: F**0.25}
    for age, factor in expected.items():
        history, t = _spiky_history(age, state)
        ratio = rolling_forecast(history, t, state) / plain_forecast(history, t, state)
        np.testing.assert_allclose(ratio, factor, rtol=1e-9, atol=0)


def test_no_elevation_when_factor_is_one():
    prices = synth_prices(PriceProcessSpec(seed=6), 20).prices
    state = fit_forecaster(prices)
    history, t = _spiky_history(0, state)
    assert np.array_equal(rolling_forecast(history, t, state), plain_forecast(history, t, state))


def test_forecast_needs_history():
    with pytest.raises(ConfigurationError):
        plain_forecast(np.ones(10), 1, constant_forecaster())


# -- consumers -----------------------------------------------------------------


def test_insensitive_plan_is_baseline():
    base = 50 + 10 * np.sin(np.arange(96) / 10)
    spec = ConsumerSpec("insensitive", base)
    for seed in range(5):
        fc = np.random.default_rng(seed).uniform(-50, 500, 9)
        dec = consumer_decide(spec, fc, initial_state(spec), 37)
        assert np.array_equal(dec.plan, base[37:46])


def test_linear_direct_substitution():
    spec = ConsumerSpec("linear", np.full(96, 10.0), coeffs=[-0.5] + [0.0] * 8)
    dec = consumer_decide(spec, np.full(9, 4.0), initial_state(spec), 0)
    assert dec.plan[0] == 8.0


def test_linear_plan_respects_bounds():
    spec = ConsumerSpec("linear", np.full(96, 10.0), p_min=2.0, p_max=12.0, coeffs=[-0.5] + [0.1] * 8)
    dec = consumer_decide(spec, np.array([100.0, -80, 5, 5, 5, 5, 5, 5, 5]), initial_state(spec), 0)
    assert np.all(dec.plan >= 2.0) and np.all(dec.plan <= 12.0)


def _enumerate_cheapest(prices, energy, cap):
    """Every split of ``energy`` into cap-sized units over the slots; cheapest, then earliest."""
    units = int(round(energy / cap))
    best = None
    for combo in itertools.combinations_with_replacement(range(len(prices)), units):
        counts = np.bincount(combo, minlength=len(prices))
        if np.any(counts > 1):
            continue
        cost = sum(prices[k] for k in combo)
        key = (cost, tuple(sorted(combo)))
        if best is None or key < best:
            best = key
    alloc = np.zeros(len(prices))
    alloc[list(best[1])] = cap
    return alloc


def test_shiftable_job_goes_to_earliest_cheapest_period():
    prices = np.array([30.0, 20.0, 25.0, 20.0])
    placed = place_job(1.0, prices, slots=4, after=0, reservation=0.0, cap_mwh=1.0)
    assert np.array_equal(placed, _enumerate_cheapest(prices, 1.0, 1.0))
    assert np.argmax(placed) == 1


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(1, 6), min_size=4, max_size=9),
    st.integers(1, 3),
)
def test_greedy_placement_matches_enumeration(int_prices, units):
    prices = np.array(int_prices, dtype=float) * 5.0
    units = min(units, len(prices))
    placed = place_job(float(units), prices, slots=len(prices), after=0, reservation=0.0, cap_mwh=1.0)
    np.testing.assert_array_equal(placed, _enumerate_cheapest(prices, float(units), 1.0))


def test_shiftable_consumer_places_job_in_window():
    job = JobSpec(energy_mwh=1.0, release=41, deadline=44, max_rate_mw=4.0)
    spec = ConsumerSpec("shiftable", np.full(96, 5.0), jobs=[job])
    fc = np.array([30.0, 20.0, 25.0, 20.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    dec = consumer_decide(spec, fc, initial_state(spec), 40)
    assert np.argmax(dec.flexible) == 1
    assert dec.flexible[1] * DT_HOURS == pytest.approx(1.0)
    assert np.all(dec.flexible[4:] == 0)


def test_infeasible_job():
    with pytest.raises(InfeasibleError):
        JobSpec(energy_mwh=1.0, release=50, deadline=40, max_rate_mw=4.0)
    with pytest.raises(InfeasibleError):
        JobSpec(energy_mwh=10.0, release=50, deadline=51, max_rate_mw=4.0)


def _thermal_problem(seed):
    r = np.random.default_rng(seed)
    th = ThermalParams()
    lam = r.uniform(20, 90, 9)
    temps = r.uniform(24, 36, 9)
    theta0 = r.uniform(21, 26)
    return th, lam, temps, theta0


def _solve(solver, th, lam, temps, theta0, p0=None):
    p0 = np.zeros(9) if p0 is None else p0
    return solver(lam, temps, theta0, th.a, th.g, th.band_lo, th.band_hi, th.softness, th.weight,
                  DT_HOURS, th.hvac_max, p0, th.effort, th.tol, th.max_sweeps)


@pytest.mark.parametrize("seed", range(6))
def test_thermal_solution_is_stationary(seed):
    th, lam, temps, theta0 = _thermal_problem(seed)
    plan, sweeps = _solve(_thermal_py.solve_thermal, th, lam, temps, theta0)
    assert sweeps < th.max_sweeps
    assert np.all(plan >= 0) and np.all(plan <= th.hvac_max)

    def f(p):
        return _thermal_py.objective(p, lam, theta0, temps, th.a, th.g, th.band_lo, th.band_hi,
                                     th.softness, th.weight, DT_HOURS, th.effort)

    h = 1e-6
    for k in range(9):
        e = np.zeros(9)
        e[k] = h
        g = (f(plan + e) - f(plan - e)) / (2 * h)
        if plan[k] <= 0.0:
            assert g >= -1e-4
        elif plan[k] >= th.hvac_max:
            assert g <= 1e-4
        else:
            assert abs(g) < 1e-4


@pytest.mark.skipif(kernels.BACKEND != "compiled", reason="compiled thermal kernel not built")
@pytest.mark.parametrize("seed", range(6))
def test_thermal_compiled_matches_python(seed):
    th, lam, temps, theta0 = _thermal_problem(seed)
    a, _ = _solve(_thermal_py.solve_thermal, th, lam, temps, theta0)
    b, _ = _solve(kernels.get_solver("compiled"), th, lam, temps, theta0)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-7)


def test_thermal_warm_start_reaches_same_plan():
    th, lam, temps, theta0 = _thermal_problem(9)
    cold, _ = _solve(_thermal_py.solve_thermal, th, lam, temps, theta0)
    warm, sweeps = _solve(_thermal_py.solve_thermal, th, lam, temps, theta0, p0=cold)
    np.testing.assert_allclose(warm, cold, atol=1e-7)
    assert sweeps <= 2


# -- simulation and oracle -----------------------------------------------------


def _linear_trace(coeffs, base=30.0, days=3, seed=0, price=None):
    prices = synth_prices(PriceProcessSpec(seed=seed), days).prices if price is None else price
    fstate = fit_forecaster(prices[: PERIODS_PER_DAY])
    spec = ConsumerSpec("linear", np.full(96, base), p_min=0.0, p_max=1e6, coeffs=coeffs)
    return simulate(prices, np.full(len(prices), 25.0), spec, fstate)


def test_insensitive_loads_and_oracle_are_exactly_baseline_and_zero():
    sc = Scenario(name="flat", days=3, warmup_days=2, consumer={"kind": "insensitive", "baseline": {"level": 80, "amplitude": 0.2}},
                  forecaster={"elevation_factor": 2.0})
    res = run_scenario(sc)
    base = res.scenario.consumer_spec().baseline
    assert np.array_equal(res.dataset.load, np.tile(base, 3))
    anchors = res.anchors()
    assert np.all(res.oracle_matrix(anchors[::7]) == 0.0)


def test_linear_loads_recompute_from_logged_forecasts():
    coeffs = np.array([-0.4, 0.1, 0.05, 0.02, 0.0, 0.0, 0.0, 0.0, -0.1])
    trace = _linear_trace(coeffs)
    spec = trace.consumer
    for t in range(trace.t_first, trace.t_last, 17):
        fc = np.concatenate([[trace.prices[t]], trace.forecasts[t]])
        ext = np.concatenate([fc, np.full(8, fc[-1])])
        expected = np.clip(spec.baseline[t % 96] + float(np.dot(coeffs, ext[:9])), spec.p_min, spec.p_max)
        assert trace.loads[t] == expected


def test_linear_forecasts_use_history_only():
    trace = _linear_trace(np.array([-0.4] + [0.1] * 8), days=3)
    t = 150
    changed = trace.prices.copy()
    changed[t + 1 :] += 50.0
    again = simulate(changed, trace.temps, trace.consumer, trace.forecaster)
    assert again.loads[t] == trace.loads[t]
    assert np.array_equal(again.forecasts[t], trace.forecasts[t])


def test_oracle_linear_own_elasticity_analytic():
    prices = np.full(3 * PERIODS_PER_DAY, 40.0)
    trace = _linear_trace(np.array([-0.5] + [0.0] * 8), base=30.0, price=prices)
    e = oracle_at(trace, 100, dlambda=3.0)
    assert e[0] == pytest.approx(-2.0, abs=1e-12)
    assert np.all(np.abs(e[1:]) < 1e-12)


@pytest.mark.parametrize("seed", [0, 1])
def test_oracle_linear_own_elasticity_nonpositive(seed):
    trace = _linear_trace(np.array([-0.3, 0.05, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), base=60.0, seed=seed)
    for t in range(trace.t_first + 40, trace.t_last - 9, 11):
        assert oracle_at(trace, t)[0] <= 0.0


def test_oracle_thermal_central_difference_is_second_order():
    sc = Scenario(name="rich", days=3, warmup_days=2,
                  consumer={"kind": "thermal", "baseline": 20.0, "p_max": 100.0, "thermal": {"c_th": 30.0}})
    res = run_scenario(sc)
    trace = res.trace
    t0 = res.offset + 96 + 50
    e = [oracle_at(trace, t0, d)[:3] for d in (4.0, 2.0, 1.0)]
    d1 = np.abs(e[0] - e[1])
    d2 = np.abs(e[1] - e[2])
    assert np.all(d1 > 1e-7)
    np.testing.assert_allclose(d1 / d2, 4.0, rtol=0.2)


def test_simulation_is_deterministic():
    sc = builtin_scenario("smoke").with_seed(3)
    a = run_scenario(sc)
    b = run_scenario(sc)
    for col in ("price", "load", "temp_c", "rh_pct", "dewpoint_c", "holiday"):
        assert np.array_equal(getattr(a.dataset, col), getattr(b.dataset, col))
    anchors = a.anchors()[::50]
    assert np.array_equal(a.oracle_matrix(anchors), b.oracle_matrix(anchors))


def _post_spike_mask(res):
    post = np.zeros(len(res.dataset), dtype=bool)
    for s in np.flatnonzero(res.injected_spikes & (res.dataset.price >= res.forecaster.threshold)):
        post[s + 1 : s + 9] = True
    return post


def test_thermal_oracle_vanishes_after_spikes():
    res = run_scenario(Scenario(**{**builtin_scenario("thermal").to_dict(), "days": 20}))
    anchors = res.anchors()
    E = np.abs(res.oracle_matrix(anchors))
    post = _post_spike_mask(res)[anchors]
    spike = res.dataset.price[anchors] >= res.forecaster.threshold
    normal = ~post & ~spike
    assert post.sum() >= 8
    assert np.median(E[post]) < 0.2 * np.median(E[normal])


@pytest.mark.parametrize("name", ["thermal", "shiftable"])
def test_negative_cross_elasticity_exists(name):
    doc = builtin_scenario(name).to_dict()
    doc["days"] = 20
    res = run_scenario(Scenario(**doc))
    E = res.oracle_matrix(res.anchors())
    assert np.any(E[:, 2] < 0.0)


# -- scenario files ------------------------------------------------------------


def test_builtin_scenarios_load():
    for name in ("insensitive", "linear", "thermal", "shiftable", "smoke"):
        sc = builtin_scenario(name)
        sc.consumer_spec()
        sc.price_spec()


def test_missing_scenario_file_names_path(tmp_path):
    path = tmp_path / "nope.json"
    with pytest.raises(ConfigurationError, match="nope.json"):
        load_scenario(path)


def test_unknown_scenario_field():
    with pytest.raises(ConfigurationError, match="colour"):
        load_scenario({"name": "x", "consumer": {"kind": "insensitive"}, "colour": "red"})


def test_oracle_csv_round_trip(tmp_path):
    res = run_scenario(builtin_scenario("smoke"))
    anchors = res.anchors()[:20]
    values = res.oracle_matrix(anchors)
    path = tmp_path / "oracle.csv"
    write_oracle_csv(path, res.dataset, anchors, values, 3.0)
    assert path.read_text().splitlines()[0] == "anchor_timestamp,e0,e1,e2,e3,e4,e5,e6,e7,e8,dlambda"
    stamps, back, dl = read_oracle_csv(path)
    assert stamps[0] == res.dataset.timestamp_str(anchors[0])
    assert np.array_equal(back, values) and np.all(dl == 3.0)
