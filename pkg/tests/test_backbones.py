import numpy as np
import pytest

from smoothtta.backbones import (
    BiasedOracleForecaster,
    FitError,
    NaiveLastForecaster,
    NormalizationWrapper,
    SeasonalNaiveForecaster,
    fit_linear_backbone,
    load_backbone,
    save_backbone,
)


def test_linear_backbone_extrapolates_pure_trend():
    # independent oracle: on y_t = t the best linear one-step map is exact,
    # so lookback [1,2,3,4] must forecast [5,6]
    series = np.arange(1.0, 401.0)[:, None]
    fc = fit_linear_backbone(series, lookback=4, horizon=2, ridge_strength=1e-9)
    pred = fc.predict(np.array([[1.0], [2.0], [3.0], [4.0]]))
    assert np.allclose(pred.ravel(), [5.0, 6.0], atol=1e-6)


def test_linear_backbone_constant_series_predicts_constant():
    series = np.full((300, 2), 3.3)
    fc = fit_linear_backbone(series, lookback=8, horizon=4)
    pred = fc.predict(np.full((8, 2), 3.3))
    assert np.allclose(pred, 3.3, atol=1e-8)


def test_linear_backbone_huge_ridge_falls_back_to_mean():
    rng = np.random.default_rng(0)
    series = rng.standard_normal((500, 1)) + 2.0
    fc = fit_linear_backbone(series, lookback=6, horizon=3, ridge_strength=1e12)
    pred = fc.predict(rng.standard_normal((6, 1)) + 2.0)
    # map ~ 0, prediction ~ train target mean
    assert np.allclose(pred, series.mean(), atol=0.05)


def test_linear_backbone_insufficient_data():
    with pytest.raises(FitError):
        fit_linear_backbone(np.zeros((10, 1)), lookback=8, horizon=4)


def test_linear_backbone_rejects_wrong_shape():
    series = np.random.default_rng(1).standard_normal((200, 2))
    fc = fit_linear_backbone(series, lookback=6, horizon=3)
    with pytest.raises(ValueError):
        fc.predict(np.zeros((5, 2)))


def test_linear_backbone_params_frozen_and_digest_stable():
    series = np.random.default_rng(2).standard_normal((200, 1))
    fc = fit_linear_backbone(series, lookback=6, horizon=3)
    digest = fc.param_digest()
    with pytest.raises(ValueError):
        fc.weights[0, 0, 0] = 5.0
    fc.predict(series[:6])
    assert fc.param_digest() == digest


def test_naive_last_repeats_final_row():
    fc = NaiveLastForecaster(lookback=4, horizon=3, channels=2)
    X = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 2.0]])
    assert np.allclose(fc.predict(X), np.tile([1.0, 2.0], (3, 1)))


def test_seasonal_naive_repeats_last_period():
    fc = SeasonalNaiveForecaster(lookback=6, horizon=5, channels=1, period=3)
    X = np.arange(6.0)[:, None]
    assert np.allclose(fc.predict(X).ravel(), [3, 4, 5, 3, 4])


def test_oracle_with_bias_residual_is_minus_bias():
    rng = np.random.default_rng(3)
    series = rng.standard_normal((50, 2))
    fc = BiasedOracleForecaster(series, lookback=8, horizon=4, bias=np.float64(0.3))
    start = 20
    pred = fc.predict(series[start - 8 : start], start=start)
    residual = series[start : start + 4] - pred
    assert np.allclose(residual, -0.3, atol=1e-12)


def test_oracle_requires_start_index():
    fc = BiasedOracleForecaster(np.zeros((20, 1)), lookback=4, horizon=2, bias=np.float64(0.0))
    with pytest.raises(ValueError, match="start"):
        fc.predict(np.zeros((4, 1)))


def test_normalization_wrapper_disabled_is_identity():
    rng = np.random.default_rng(4)
    series = rng.standard_normal((300, 2))
    inner = fit_linear_backbone(series, lookback=8, horizon=4)
    wrapped = NormalizationWrapper(inner, enabled=False)
    X = series[:8]
    assert np.array_equal(wrapped.predict(X), inner.predict(X))


def test_normalization_wrapper_affine_equivariance():
    rng = np.random.default_rng(5)
    series = rng.standard_normal((400, 2))
    inner = fit_linear_backbone(series, lookback=8, horizon=4)
    wrapped = NormalizationWrapper(inner, enabled=True)
    X = rng.standard_normal((8, 2))
    base = wrapped.predict(X)
    scaled = X.copy()
    scaled[:, 0] = 3.0 * X[:, 0] + 7.0
    out = wrapped.predict(scaled)
    assert np.allclose(out[:, 0], 3.0 * base[:, 0] + 7.0, atol=1e-9)
    assert np.allclose(out[:, 1], base[:, 1], atol=1e-12)


def test_normalization_round_trip_on_lookback_statistics():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((10, 3)) * 4 + 1

    class Echo:
        kind = "echo"
        lookback, horizon, channels = 10, 10, 3

        def predict(self, Xn, start=None):
            return Xn.copy()

        def param_digest(self):
            return "echo"

    wrapped = NormalizationWrapper(Echo(), enabled=True)
    assert np.abs(wrapped.predict(X) - X).max() < 1e-10


def test_normalization_handles_flat_channel():
    class Echo:
        kind = "echo"
        lookback, horizon, channels = 6, 6, 1

        def predict(self, Xn, start=None):
            return Xn.copy()

        def param_digest(self):
            return "echo"

    X = np.full((6, 1), 4.0)
    out = NormalizationWrapper(Echo(), enabled=True).predict(X)
    assert np.all(np.isfinite(out))
    assert np.allclose(out, 4.0)


def test_backbone_file_round_trip(tmp_path):
    series = np.random.default_rng(7).standard_normal((300, 2))
    fc = fit_linear_backbone(series, lookback=8, horizon=4)
    path = tmp_path / "backbone.params"
    save_backbone(fc, path)
    loaded = load_backbone(path)
    assert loaded.param_digest() == fc.param_digest()
    X = series[:8]
    assert np.array_equal(loaded.predict(X), fc.predict(X))
