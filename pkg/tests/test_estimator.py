import numpy as np
import pytest
from sklearn.base import clone

from qonv.errors import ConfigurationError, DimensionError
from qonv.estimator import NeuralFieldRegressor
from qonv.signals import make_image_pair, make_signal_pair


def fitted_1d(seed=0, **over):
    pair = make_signal_pair(16, 0.5, 0.125, 3)
    params = dict(family="qnn", depth=2, width=6, kernel=3, iterations=40,
                  lr=1e-2, seed=seed)
    params.update(over)
    est = NeuralFieldRegressor(**params)
    est.fit(pair.coords, pair.high, low_freq=pair.low)
    return est, pair


def test_get_params_round_trip():
    est = NeuralFieldRegressor(family="cnn", width=12, lr=2e-3)
    params = est.get_params()
    assert params["family"] == "cnn"
    assert params["width"] == 12
    rebuilt = NeuralFieldRegressor(**params)
    assert rebuilt.get_params() == params


def test_clone_preserves_configuration():
    est = NeuralFieldRegressor(family="qnn", width=7, encoding="fourier")
    twin = clone(est)
    assert twin.get_params() == est.get_params()


def test_set_params_updates():
    est = NeuralFieldRegressor()
    est.set_params(width=33, activation="sinc")
    assert est.width == 33 and est.activation == "sinc"


def test_fit_predict_1d_shapes():
    est, pair = fitted_1d()
    pred = est.predict(pair.coords, low_freq=pair.low)
    assert pred.shape == (1, 16)
    assert est.loss_trace_.shape == (41,)
    assert est.spec_.rank == "1d"


def test_fit_predict_2d_shapes():
    rng = np.random.default_rng(0)
    pair = make_image_pair(rng.random((3, 12, 12)), 1.0)
    est = NeuralFieldRegressor(family="qnn", depth=2, width=5, kernel=3,
                               residual_output=True, iterations=10, lr=1e-3)
    est.fit(pair.coords, pair.ground_truth, low_freq=pair.low)
    pred = est.predict(pair.coords, low_freq=pair.low)
    assert pred.shape == (3, 12, 12)
    assert est.spec_.rank == "2d"


def test_training_reduces_loss():
    est, _ = fitted_1d()
    assert est.loss_trace_[-1] < est.loss_trace_[0]


def test_same_seed_reproduces_fit():
    a, pair = fitted_1d(seed=5)
    b, _ = fitted_1d(seed=5)
    np.testing.assert_array_equal(a.loss_trace_, b.loss_trace_)
    np.testing.assert_array_equal(a.predict(pair.coords, low_freq=pair.low),
                                  b.predict(pair.coords, low_freq=pair.low))


def test_sample_mask_must_cover_samples():
    pair = make_signal_pair(16, 0.5, 0.125, 3)
    est = NeuralFieldRegressor(family="mlp", depth=2, width=4, iterations=1)
    with pytest.raises(DimensionError):
        est.fit(pair.coords, pair.high, sample_mask=np.ones(8))


def test_predict_before_fit_raises():
    est = NeuralFieldRegressor()
    with pytest.raises(Exception):
        est.predict(np.zeros((1, 8)))


def test_low_freq_needed_at_predict_time():
    est, pair = fitted_1d()
    with pytest.raises(ConfigurationError):
        est.predict(pair.coords)


def test_spatial_mismatch_rejected():
    pair = make_signal_pair(16, 0.5, 0.125, 3)
    est = NeuralFieldRegressor(family="mlp", depth=2, width=4, iterations=1)
    with pytest.raises(DimensionError):
        est.fit(pair.coords, pair.high[:, :8])


def test_non_finite_inputs_rejected():
    est = NeuralFieldRegressor(family="mlp", depth=2, width=4, iterations=1)
    bad = np.full((1, 8), np.nan)
    with pytest.raises(ConfigurationError):
        est.fit(bad, np.zeros((1, 8)))


def test_score_is_r_squared_like():
    est, pair = fitted_1d()
    score = est.score(pair.coords, pair.high, low_freq=pair.low)
    assert score <= 1.0
