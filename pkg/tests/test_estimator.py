import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastiq.dataio import LOAD_COL, PRICE_COL, build_samples, fit_scaler
from elastiq.errors import ConfigurationError, EmptyLossError
from elastiq.estimator import (
    NO_RELIABLE_DATA,
    SYNTHETIC_HEADER,
    EstimatorConfig,
    SiameseBundle,
    SyntheticSet,
    build_synthetic,
    encode,
    encodings,
    estimate,
    generate_synthetic,
    perturbed_windows,
    predict_loads,
    prediction_accuracy,
    secant_elasticities,
    train_stage1,
    train_stage2,
    weighting_factor,
    wf_from_eta,
    write_synthetic_csv,
)
from elastiq.market import run_scenario
from elastiq.market.scenario import Scenario
from elastiq.nn import TrainConfig, forward_sequence

from runs import scenario_run

T_IN = 12


def small_config(**kw) -> EstimatorConfig:
    base = dict(
        t_in=T_IN, n_cell=8, n_den_p=8, n_den_e=8,
        stage1=TrainConfig(batch_size=32, max_iters=40),
        stage2=TrainConfig(batch_size=32, max_iters=40, loss="weighted_mse", trainable_scope="head-only"),
    )
    base.update(kw)
    return EstimatorConfig(**base)


def _samples(consumer, days=4, warmup=2):
    res = run_scenario(Scenario(name="t", consumer=consumer, days=days, warmup_days=warmup,
                                forecaster={"elevation_factor": 2.0, "half_life": 4}))
    ds = res.dataset
    scaler = fit_scaler(ds)
    return build_samples(ds, scaler, t_in=T_IN), scaler, res


THERMAL = {"kind": "thermal", "baseline": 20.0, "p_max": 200.0, "thermal": {"c_th": 30.0}}


@pytest.fixture(scope="module")
def thermal_data():
    return _samples(THERMAL)


@pytest.fixture(scope="module")
def stage1(thermal_data):
    samples, scaler, _ = thermal_data
    cfg = small_config()
    params_p, hist = train_stage1(samples, scaler, cfg)
    return params_p, hist, cfg


# -- stage 1 -------------------------------------------------------------------


def test_constant_load_is_learned():
    samples, scaler, _ = _samples({"kind": "insensitive", "baseline": 80.0}, days=3)
    cfg = small_config(stage1=TrainConfig(batch_size=32, max_iters=2000, learning_rate=3e-3))
    params, _ = train_stage1(samples, scaler, cfg)
    pred = predict_loads(params, samples.windows[::5], scaler)
    np.testing.assert_allclose(pred, 80.0, rtol=0.01)


def test_stage1_is_deterministic(thermal_data, stage1):
    samples, scaler, _ = thermal_data
    params_p, hist, cfg = stage1
    again, hist2 = train_stage1(samples, scaler, cfg)
    assert hist.train_loss == hist2.train_loss
    for k, v in params_p.named_arrays().items():
        assert np.array_equal(v, again.named_arrays()[k])


def test_empty_training_set(thermal_data):
    samples, scaler, _ = thermal_data
    with pytest.raises(ConfigurationError):
        train_stage1(samples.subset(np.zeros(0, dtype=int)), scaler, small_config())


# -- encodings -----------------------------------------------------------------


def test_encode_is_forward_sequence_encoding(thermal_data, stage1):
    samples, _, _ = thermal_data
    params_p = stage1[0]
    for k in (0, 7, 30):
        enc = encode(samples.windows[k], params_p)
        assert np.array_equal(enc, forward_sequence(samples.windows[k], params_p)[1])
    batched = encodings(params_p, samples.windows[:31])
    np.testing.assert_allclose(batched[30], encode(samples.windows[30], params_p), rtol=0, atol=1e-12)


def test_encodings_are_bounded(thermal_data, stage1):
    samples, _, _ = thermal_data
    enc = encodings(stage1[0], samples.windows)
    assert enc.shape == (len(samples), 9, 8)
    assert np.all(np.abs(enc) < 1.0)


def test_encoding_ignores_history_before_window(thermal_data, stage1):
    samples, scaler, res = thermal_data
    ds = res.dataset
    a = int(samples.anchors[60])
    first = a + 9 - T_IN  # first window row
    changed = dataclasses.replace(ds, price=ds.price.copy(), load=ds.load.copy())
    changed.price[first - 3] *= 5.0
    changed.load[: first - 9] += 7.0  # lagged-load feature reads load at k - 9
    s1 = build_samples(ds, scaler, t_in=T_IN, anchors=[a])
    s2 = build_samples(changed, scaler, t_in=T_IN, anchors=[a])
    assert np.array_equal(s1.windows, s2.windows)
    assert np.array_equal(encode(s1.windows[0], stage1[0]), encode(s2.windows[0], stage1[0]))


# -- synthetic elasticities ----------------------------------------------------


def test_zero_price_weights_give_zero_elasticity(thermal_data, stage1):
    samples, scaler, _ = thermal_data
    params = stage1[0].copy()
    for g in ("f", "i", "o", "c"):
        getattr(params.cell, f"W_{g}")[:, PRICE_COL] = 0.0
    synth = generate_synthetic(samples, params, 3.0, scaler)
    assert np.all(synth == 0.0)


@pytest.mark.parametrize("dlambda", [1.0, 3.0, 6.0])
def test_affine_stub_reproduces_slope(thermal_data, dlambda):
    samples, scaler, _ = thermal_data
    a, b = 500.0, 2.5
    step = T_IN - 9

    def stub(windows):
        lam = scaler.unscale_column(windows[:, step, PRICE_COL], PRICE_COL)
        return np.repeat((a - b * lam)[:, None], 9, axis=1)

    loads = np.repeat((a - b * samples.anchor_prices)[:, None], 9, axis=1)
    s = dataclasses.replace(samples, targets=loads)
    e = generate_synthetic(s, None, dlambda, scaler, predictor=stub)
    expected = -b * samples.anchor_prices / (a - b * samples.anchor_prices)
    np.testing.assert_allclose(e[:, 0], expected, rtol=1e-9, atol=0)


def test_synthetic_matches_hand_secant(thermal_data, stage1):
    samples, scaler, _ = thermal_data
    params_p = stage1[0]
    dl = 3.0
    step = T_IN - 9
    lo, hi = scaler.mins[PRICE_COL], scaler.maxs[PRICE_COL]
    lo_l, hi_l = scaler.mins[LOAD_COL], scaler.maxs[LOAD_COL]
    got = generate_synthetic(samples.subset(np.arange(12)), params_p, dl, scaler)
    for k in range(12):
        w = samples.windows[k]
        lam = w[step, PRICE_COL] * (hi - lo) + lo
        up, down = w.copy(), w.copy()
        up[step, PRICE_COL] = (lam + dl - lo) / (hi - lo)
        down[step, PRICE_COL] = (lam - dl - lo) / (hi - lo)
        p_up = forward_sequence(up, params_p)[0] * (hi_l - lo_l) + lo_l
        p_down = forward_sequence(down, params_p)[0] * (hi_l - lo_l) + lo_l
        lam_a = samples.anchor_prices[k]
        hand = lam_a / dl * (p_up - p_down) / (2.0 * samples.targets[k])
        np.testing.assert_allclose(got[k], hand, rtol=0, atol=1e-12)


def test_perturbed_price_is_not_clipped(thermal_data):
    samples, scaler, _ = thermal_data
    step = T_IN - 9
    w = samples.windows[:1].copy()
    w[0, step, PRICE_COL] = 1.0  # training-range maximum
    up, down = perturbed_windows(w, scaler, 3.0)
    span = scaler.maxs[PRICE_COL] - scaler.mins[PRICE_COL]
    assert up[0, step, PRICE_COL] == pytest.approx(1.0 + 3.0 / span, abs=1e-12)
    mask = np.ones_like(up, dtype=bool)
    mask[0, step, PRICE_COL] = False
    assert np.array_equal(up[mask], w[mask])
    assert np.array_equal(down[mask], w[mask])


finite = st.floats(1.0, 1e3, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=9, max_size=9), st.lists(finite, min_size=9, max_size=9), finite, finite,
       st.floats(0.1, 10.0))
def test_secant_is_antisymmetric(p_plus, p_minus, lam, load, dl):
    fwd = secant_elasticities(np.array([p_plus]), np.array([p_minus]), [lam], np.full((1, 9), load), dl)
    back = secant_elasticities(np.array([p_minus]), np.array([p_plus]), [lam], np.full((1, 9), load), dl)
    assert np.array_equal(fwd, -back)
    assert np.all(np.isfinite(fwd))


def test_prediction_accuracy_perfect_is_one():
    loads = np.array([[10.0, 20.0], [5.0, 8.0]])
    assert np.array_equal(prediction_accuracy(loads, loads), np.ones(2))
    assert prediction_accuracy([[11.0, 18.0]], [[10.0, 20.0]])[0] == pytest.approx(1 - (0.01 + 0.01) / 2)


# -- weighting factor ----------------------------------------------------------


def test_wf_examples():
    assert wf_from_eta(0.9, 0.8, 0.5) == pytest.approx(1 / 1.4, abs=1e-12)
    assert wf_from_eta(0.79, 0.8, 0.5) == 0.0
    assert wf_from_eta(np.nextafter(0.8, 0.0), 0.8, 0.5) == 0.0
    assert wf_from_eta(0.8, 0.8, 0.5) == 1 / 1.3


@settings(max_examples=200, deadline=None)
@given(st.floats(-2.0, 1.0), st.floats(0.01, 1.0), st.floats(0.01, 5.0))
def test_wf_invariants(eta, eta_th, alpha):
    wf = float(wf_from_eta(eta, eta_th, alpha))
    if eta < eta_th:
        assert wf == 0.0
    else:
        assert 1 / (1 + alpha) - 1e-12 <= wf <= 1 / (eta_th + alpha) + 1e-12


def test_weighting_factor_uses_unperturbed_prediction(thermal_data, stage1):
    samples, scaler, _ = thermal_data
    params_p = stage1[0]
    wf, eta = weighting_factor(samples, params_p, scaler, 0.8, 0.5)
    expected_eta = prediction_accuracy(predict_loads(params_p, samples.windows, scaler), samples.targets)
    assert np.array_equal(eta, expected_eta)
    assert np.array_equal(wf, wf_from_eta(expected_eta, 0.8, 0.5))


# -- stage 2 -------------------------------------------------------------------


@pytest.fixture(scope="module")
def stage2(thermal_data, stage1):
    samples, scaler, _ = thermal_data
    params_p, _, cfg = stage1
    synth = build_synthetic(samples, params_p, scaler, cfg)
    params_e, hist = train_stage2(samples.windows, synth, params_p, cfg)
    return synth, params_e, hist


def test_stage2_leaves_cell_bit_identical(stage1, stage2):
    params_p = stage1[0]
    params_e = stage2[1]
    for name in ("W_f", "W_i", "W_o", "W_c", "V_f", "V_i", "V_o", "V_c", "b_f", "b_i", "b_o", "b_c"):
        assert np.array_equal(getattr(params_e.cell, name), getattr(params_p.cell, name))
    assert params_e.meta.tail_position and params_e.meta.n_den == 8


def test_stage2_aborts_without_reliable_data(thermal_data, stage1, stage2):
    samples = thermal_data[0]
    synth = stage2[0]
    dead = SyntheticSet(synth.targets, synth.eta, np.zeros_like(synth.wf))
    with pytest.raises(EmptyLossError, match="no reliable synthetic data"):
        train_stage2(samples.windows, dead, stage1[0], stage1[2])
    assert "lower η_th" in NO_RELIABLE_DATA


def test_doubling_wf_gives_identical_head(thermal_data, stage1, stage2):
    samples = thermal_data[0]
    synth, params_e, _ = stage2
    doubled = SyntheticSet(synth.targets, synth.eta, 2.0 * synth.wf)
    again, _ = train_stage2(samples.windows, doubled, stage1[0], stage1[2])
    for name in ("W_h1", "b_h1", "W_h2", "b_h2"):
        np.testing.assert_allclose(getattr(again.head, name), getattr(params_e.head, name), rtol=1e-12, atol=1e-14)


def test_stage2_only_uses_kept_samples(thermal_data, stage1, stage2):
    samples = thermal_data[0]
    synth, params_e, _ = stage2
    keep = np.arange(len(samples)) % 2 == 0
    wf = np.where(keep, synth.wf, 0.0)
    noisy = synth.targets.copy()
    noisy[~keep] = 1e6  # dropped targets must not matter
    a, _ = train_stage2(samples.windows, SyntheticSet(synth.targets, synth.eta, wf), stage1[0], stage1[2])
    b, _ = train_stage2(samples.windows, SyntheticSet(noisy, synth.eta, wf), stage1[0], stage1[2])
    assert np.array_equal(a.head.W_h1, b.head.W_h1)


# -- estimation and bundle -----------------------------------------------------


def test_zero_head_outputs_bias(thermal_data, stage1, stage2):
    samples, scaler, _ = thermal_data
    params_e = stage2[1].copy()
    params_e.head.W_h1[:] = 0.0
    params_e.head.W_h2[:] = 0.0
    params_e.head.b_h2[:] = -0.37
    bundle = SiameseBundle(stage1[0], params_e, scaler, stage1[2])
    assert np.all(estimate(samples.windows[:10], bundle) == -0.37)


def test_estimate_is_forward_sequence_output(thermal_data, stage1, stage2):
    samples, scaler, _ = thermal_data
    bundle = SiameseBundle(stage1[0], stage2[1], scaler, stage1[2])
    w = samples.windows[5]
    assert np.array_equal(estimate(w, bundle), forward_sequence(w, stage2[1])[0])
    np.testing.assert_allclose(estimate(samples.windows[:6], bundle)[5], estimate(w, bundle), atol=1e-12)


def test_bundle_round_trip(tmp_path, thermal_data, stage1, stage2):
    samples, scaler, _ = thermal_data
    bundle = SiameseBundle(stage1[0], stage2[1], scaler, stage1[2])
    bundle.save(tmp_path / "b")
    back = SiameseBundle.load(tmp_path / "b")
    assert np.array_equal(estimate(samples.windows, back), estimate(samples.windows, bundle))
    assert back.config == bundle.config
    (tmp_path / "b" / "scaler.json").unlink()
    with pytest.raises(ConfigurationError, match="scaler.json"):
        SiameseBundle.load(tmp_path / "b")


def test_synthetic_csv(tmp_path, thermal_data, stage2):
    samples = thermal_data[0]
    synth = stage2[0]
    write_synthetic_csv(tmp_path / "s.csv", samples, synth)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == ",".join(SYNTHETIC_HEADER)
    assert len(lines) == len(samples) + 1
    row = lines[1].split(",")
    assert float(row[1]) == synth.targets[0, 0] and float(row[-1]) == synth.wf[0]


@pytest.mark.parametrize(
    "kw", [{"dlambda": 0.0}, {"eta_th": 0.0}, {"eta_th": 1.1}, {"alpha": 0.0}, {"t_out": 8}]
)
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        EstimatorConfig(**kw)


def test_config_round_trip():
    cfg = small_config(seed=4)
    assert EstimatorConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigurationError, match="bogus"):
        EstimatorConfig.from_dict({"bogus": 1})


# -- end to end on the linear consumer ------------------------------------------


@pytest.mark.slow
def test_linear_stage1_accuracy_on_held_out_days():
    run = scenario_run("linear")
    eta = prediction_accuracy(predict_loads(run.bundle.params_p, run.test.windows, run.scaler), run.test.targets)
    assert float(np.mean(eta)) > 0.95


@pytest.mark.slow
def test_linear_own_elasticity_bias():
    run = scenario_run("linear")
    bias = float(np.mean(run.estimates["smlstm"][:, 0] - run.truth[:, 0]))
    assert abs(bias) <= 0.1
