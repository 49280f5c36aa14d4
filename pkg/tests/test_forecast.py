import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

from lncascade.approx import LOG_ABS_NORMAL_VAR, omega_interval_cov
from lncascade.core_model import ModelParams
from lncascade.forecast import (PredictorSpec, build_predictor, evaluate_forecasts, forecast_errors,
                                forecast_series, gram_system, realized_targets, target_increments,
                                transform)
from lncascade.kernels import omega_cov_matrix
from lncascade.simulate import SimulationSpec, simulate_ensemble

P = ModelParams(sigma=1.0, lambda2=0.03, T=128.0)


def test_spec_validation():
    s = PredictorSpec("Log", P)
    assert (s.scale_s, s.horizon_h) == (1.0, 1.0)
    assert PredictorSpec("Sq", P, scale_s=4.0).horizon_h == 4.0
    for kw in ({"kind": "Cube"}, {"scale_s": 1.5}, {"scale_s": 4.0, "horizon_h": 2.0},
               {"window_P": 0}, {"ridge": -1.0}, {"scale_s": 0.5}):
        args = {"kind": "Log", **kw}
        with pytest.raises(ValueError):
            PredictorSpec(args.pop("kind"), P, **args)


@pytest.mark.parametrize("kind", ["Lin", "Sq", "Log"])
def test_no_intermittency_means_no_skill(kind):
    pred = build_predictor(PredictorSpec(kind, P.replace(lambda2=0.0), window_P=16))
    np.testing.assert_array_equal(pred.weights, 0.0)
    assert pred.intercept == pytest.approx(pred.target_mean)
    assert pred.prediction_variance == pytest.approx(pred.target_variance)


@pytest.mark.parametrize("kind", ["Lin", "Sq", "Log"])
@pytest.mark.parametrize("s,h", [(1.0, 1.0), (4.0, 4.0), (2.0, 8.0)])
def test_projection_orthogonality(kind, s, h):
    spec = PredictorSpec(kind, P, scale_s=s, horizon_h=h, window_P=48, ridge=0.0)
    pred = build_predictor(spec)
    col, cross = gram_system(spec)
    # residual is uncorrelated with every regressor
    np.testing.assert_allclose(linalg.toeplitz(col) @ pred.weights, cross, rtol=1e-8, atol=1e-14)
    assert 0.0 <= pred.prediction_variance <= pred.target_variance
    assert pred.prediction_variance == pytest.approx(pred.target_variance - cross @ pred.weights)


def test_longer_window_never_hurts():
    v = [build_predictor(PredictorSpec("Log", P, window_P=n, ridge=0.0)).prediction_variance for n in (4, 16, 64)]
    assert v[0] >= v[1] >= v[2]
    assert v[2] >= LOG_ABS_NORMAL_VAR


@settings(max_examples=15)
@given(st.floats(0.1, 10.0))
def test_log_weights_scale_free(sigma):
    a = build_predictor(PredictorSpec("Log", P, window_P=32))
    b = build_predictor(PredictorSpec("Log", P.replace(sigma=sigma), window_P=32))
    np.testing.assert_allclose(a.weights, b.weights, rtol=1e-10, atol=1e-15)
    assert b.intercept - a.intercept == pytest.approx(math.log(sigma) * (1 - a.weights.sum()), abs=1e-10)


def test_log_cross_cov_by_aggregating_point_covariances():
    # Cov of two interval averages of Omega from the point covariance matrix
    spec = PredictorSpec("Log", P, scale_s=3.0, horizon_h=5.0, window_P=4)
    _, cross = gram_system(spec)
    t = [0.0, 1.0, 2.0, 3.0, 4.0]  # regressors end at t0 = 4
    target = (4.0 + 5.0 - 3.0, 4.0 + 5.0)
    for k in range(4):
        reg = (t[3 - k], t[4 - k])
        S = omega_cov_matrix([reg[0], reg[1], target[0], target[1]], P.T)
        agg = (S[1, 3] - S[1, 2] - S[0, 3] + S[0, 2]) / (1.0 * 3.0)
        assert cross[k] == pytest.approx(P.lambda2 * agg, rel=1e-9)
        assert cross[k] == pytest.approx(P.lambda2 * omega_interval_cov(1.0, 3.0, 2.0 + k + 1.0, P.T), rel=1e-12)


def test_transform_and_metrics():
    x = np.array([-2.0, 0.5])
    np.testing.assert_allclose(transform("Lin", x), [2.0, 0.5])
    np.testing.assert_allclose(transform("Sq", x), [4.0, 0.25])
    np.testing.assert_allclose(transform("Log", x), np.log([2.0, 0.5]))
    with pytest.raises(ValueError):
        transform("Cube", x)
    assert evaluate_forecasts([1, 2, 3], [1, 1, 1], "MAE") == pytest.approx(1.0)
    assert evaluate_forecasts([1, 2, 3], [1, 1, 1], "MSE") == pytest.approx(5 / 3)
    with pytest.raises(ValueError):
        evaluate_forecasts([1, 2], [1], "MSE")
    with pytest.raises(ValueError):
        evaluate_forecasts([1], [1], "MAPE")


def test_target_alignment():
    x = np.arange(1.0, 11.0)
    keep, inc = target_increments(x, 2, 3, np.array([0, 5, 6, 7]))
    # origin 0: target covers increments 2..3 (values 3 + 4)
    np.testing.assert_array_equal(keep, [True, True, True, False])
    np.testing.assert_allclose(inc, [7.0, 17.0, 19.0])
    keep, y = realized_targets(x, "Sq", 1, 1, np.array([0, 8, 9]))
    np.testing.assert_allclose(y, [4.0, 100.0])


def test_forecast_series_is_rolling_dot_product():
    pred = build_predictor(PredictorSpec("Log", P, window_P=8))
    rng = np.random.default_rng(1)
    x = rng.standard_normal(30)
    fc = forecast_series(x, pred)
    z = np.log(np.abs(x))
    assert fc.origins[0] == 7 and fc.origins[-1] == 29
    for i, t in enumerate(fc.origins):
        assert fc.values[i] == pytest.approx(pred.intercept + pred.weights @ z[t::-1][:8])
    np.testing.assert_allclose(fc.level, np.exp(fc.values + 0.5 * pred.prediction_variance))
    with pytest.raises(ValueError):
        forecast_series(x[:5], pred)


def test_forecast_beats_baseline_on_simulated_paths():
    p = ModelParams(lambda2=0.04, T=256.0)
    paths = simulate_ensemble(SimulationSpec(p, 4096, 8, l_ratio=8), 6)
    spec = PredictorSpec("Log", p, window_P=128)
    ratio = [forecast_errors(x, spec)["MSE"] for x in paths]
    model = np.mean([r["model"] for r in ratio])
    base = np.mean([r["baseline"] for r in ratio])
    assert model < base
