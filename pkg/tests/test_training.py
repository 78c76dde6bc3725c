import numpy as np
import pytest

from qonv import autodiff as ad
from qonv import nets, training
from qonv.errors import ConfigurationError, NumericError
from qonv.signals import make_signal_pair


def small_qnn(seed=0):
    spec = nets.ModelSpec(family="qnn", rank="1d", depth=2, width=6, kernel=3,
                          query_channels=1, low_freq_channels=1,
                          output_channels=1)
    return nets.build_model(spec, seed)


class TestOptimizer:
    def test_zero_gradients_leave_parameters_unchanged(self):
        p = ad.Parameter("p", np.array([1.0, -2.0]))
        opt = training.Optimizer([p], kind="adam", lr=0.1)
        opt.step()
        np.testing.assert_array_equal(p.value.data, [1.0, -2.0])

    def test_first_step_magnitude_equals_lr(self):
        # bias correction makes the first Adam step exactly lr against the
        # eps guard
        p = ad.Parameter("p", np.array(0.0))
        p.grad = np.array(1.0)
        opt = training.Optimizer([p], kind="adam", lr=0.05)
        opt.step()
        np.testing.assert_allclose(p.value.data, -0.05, rtol=1e-7)

    def test_quadratic_bowl_converges(self):
        p = ad.Parameter("p", np.array(1.0))
        opt = training.Optimizer([p], kind="adam", lr=0.1)
        for _ in range(200):
            p.grad = 2.0 * p.value.data
            opt.step()
        assert abs(float(p.value.data)) < 1e-3

    def test_nan_gradient_aborts_with_parameter_name(self):
        p = ad.Parameter("weights3", np.zeros(2))
        p.grad = np.array([np.nan, 0.0])
        opt = training.Optimizer([p], kind="adam")
        with pytest.raises(NumericError, match="weights3"):
            opt.step()

    def test_adamw_decays_before_the_step(self):
        p = ad.Parameter("p", np.array(2.0))
        opt = training.Optimizer([p], kind="adamw", lr=0.1, weight_decay=0.5)
        opt.step()  # zero gradient: only the decoupled decay acts
        np.testing.assert_allclose(p.value.data, 2.0 * (1 - 0.1 * 0.5))

    def test_step_count_increments_by_one(self):
        p = ad.Parameter("p", np.zeros(1))
        opt = training.Optimizer([p])
        for want in (1, 2, 3):
            opt.step()
            assert opt.step_count == want

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigurationError):
            training.Optimizer([], kind="sgd")


class TestTrainLoop:
    def test_zero_iterations_reports_initial_loss_only(self):
        pair = make_signal_pair(16, 0.5, 0.125, 0)
        model = small_qnn()
        cfg = training.TrainConfig(iterations=0)
        _, trace = training.train(model, pair, cfg)
        assert trace.shape == (1,)
        assert trace[0] > 0.0

    def test_loss_decreases_on_signal_pair(self):
        pair = make_signal_pair(32, 0.5, 0.125, 42)
        model = small_qnn(42)
        cfg = training.TrainConfig(iterations=300, lr=1e-2)
        _, trace = training.train(model, pair, cfg)
        assert trace[-1] < trace[0]
        assert np.isfinite(trace).all()

    def test_identical_seeds_give_bitwise_identical_traces(self):
        pair = make_signal_pair(16, 0.5, 0.125, 7)
        cfg = training.TrainConfig(iterations=50, lr=1e-3)
        _, first = training.train(small_qnn(3), pair, cfg)
        _, second = training.train(small_qnn(3), pair, cfg)
        assert np.array_equal(first, second)

    def test_zero_learning_rate_keeps_trace_constant(self):
        pair = make_signal_pair(16, 0.5, 0.125, 1)
        cfg = training.TrainConfig(iterations=20, lr=0.0)
        _, trace = training.train(small_qnn(1), pair, cfg)
        assert np.all(trace == trace[0])

    def test_masked_trace_is_mean_error_over_selected_samples(self):
        pair = make_signal_pair(16, 0.5, 0.125, 5)
        mask = (np.arange(16) % 2 == 0).astype(float)
        cfg = training.TrainConfig(iterations=60, lr=1e-2)
        model, trace = training.train(small_qnn(5), pair, cfg, sample_mask=mask)
        recon = training.predict_grid(model, pair)
        selected = mask.astype(bool)
        masked_mse = ((recon - pair.full)[0, selected] ** 2).mean()
        np.testing.assert_allclose(trace[-1], masked_mse, rtol=1e-10)

    def test_mask_shape_is_validated(self):
        pair = make_signal_pair(16, 0.5, 0.125, 5)
        cfg = training.TrainConfig(iterations=1)
        with pytest.raises(ConfigurationError):
            training.train(small_qnn(), pair, cfg, sample_mask=np.ones(8))

    def test_mlp_trains_on_image_pair(self):
        rng = np.random.default_rng(0)
        from qonv.signals import make_image_pair
        pair = make_image_pair(rng.random((3, 12, 12)), 1.0)
        spec = nets.ModelSpec(family="mlp", rank="2d", depth=2, width=8,
                              query_channels=2, output_channels=3)
        model = nets.build_model(spec, 0)
        cfg = training.TrainConfig(iterations=30, lr=1e-2)
        _, trace = training.train(model, pair, cfg)
        assert trace[-1] < trace[0]

    def test_residual_qnn_trains_against_ground_truth(self):
        rng = np.random.default_rng(1)
        from qonv.signals import make_image_pair
        pair = make_image_pair(rng.random((3, 12, 12)), 1.0)
        spec = nets.ModelSpec(family="qnn", rank="2d", depth=2, width=6,
                              kernel=3, query_channels=2, low_freq_channels=3,
                              output_channels=3, residual_output=True)
        model = nets.build_model(spec, 0)
        cfg = training.TrainConfig(iterations=30, lr=1e-2)
        _, trace = training.train(model, pair, cfg)
        # at init the residual is zero, so the first loss is the blur error
        np.testing.assert_allclose(trace[0],
                                   ((pair.low - pair.ground_truth) ** 2).mean())
        assert trace[-1] < trace[0]

    def test_invalid_iterations_rejected(self):
        with pytest.raises(ConfigurationError):
            training.TrainConfig(iterations=-1)
