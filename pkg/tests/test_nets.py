import numpy as np
import pytest

from qonv import autodiff as ad
from qonv import nets
from qonv.errors import ConfigurationError, ContractError


def mlp_spec(**over):
    base = dict(family="mlp", rank="1d", depth=4, width=256,
                query_channels=1, output_channels=1)
    base.update(over)
    return nets.ModelSpec(**base)


def qnn_spec(**over):
    base = dict(family="qnn", rank="1d", depth=4, width=148, kernel=3,
                query_channels=1, low_freq_channels=1, output_channels=1)
    base.update(over)
    return nets.ModelSpec(**base)


class TestEncodings:
    def test_vanilla_is_identity(self):
        enc = nets.Encoding(kind="vanilla", input_dim=2)
        q = np.random.default_rng(0).random((2, 5))
        np.testing.assert_array_equal(nets.encode(enc, q), q)

    def test_fourier_zero_frequencies(self):
        enc = nets.Encoding(kind="fourier", input_dim=1, num_features=3,
                            frequencies=(np.zeros((3, 1)),))
        out = nets.encode(enc, np.linspace(0, 1, 4)[None, :])
        np.testing.assert_array_equal(out[:3], np.ones((3, 4)))
        np.testing.assert_array_equal(out[3:], np.zeros((3, 4)))

    def test_exponential_single_octave(self):
        enc = nets.Encoding(kind="exponential", input_dim=1, num_octaves=1)
        out = nets.encode(enc, np.array([[0.5]]))
        np.testing.assert_allclose(out[:, 0], [1.0, 0.0], atol=1e-15)

    def test_output_dims(self):
        rng = np.random.default_rng(0)
        cases = {
            "vanilla": 2,
            "fourier": 2 * 8,
            "per_axis_fourier": 2 * 8 * 2,
            "exponential": 2 * 4 * 2,
        }
        for kind, want in cases.items():
            enc = nets.make_encoding(kind, 2, rng, num_features=8, num_octaves=4)
            assert enc.output_dim() == want
            out = nets.encode(enc, rng.random((2, 3, 5)))
            assert out.shape == (want, 3, 5)

    def test_same_seed_gives_bitwise_identical_frequencies(self):
        enc_a = nets.make_encoding("fourier", 1, np.random.default_rng(5))
        enc_b = nets.make_encoding("fourier", 1, np.random.default_rng(5))
        assert np.array_equal(enc_a.frequencies[0], enc_b.frequencies[0])

    def test_per_axis_draws_independent_frequencies(self):
        enc = nets.make_encoding("per_axis_fourier", 2,
                                 np.random.default_rng(0), num_features=16)
        assert len(enc.frequencies) == 2
        assert not np.array_equal(enc.frequencies[0], enc.frequencies[1])

    def test_dimension_mismatch_rejected(self):
        enc = nets.Encoding(kind="vanilla", input_dim=2)
        with pytest.raises(ConfigurationError):
            nets.encode(enc, np.zeros((3, 4)))


class TestModelSpecValidation:
    def test_mlp_rejects_kernel(self):
        with pytest.raises(ConfigurationError):
            mlp_spec(kernel=3)

    def test_conv_requires_odd_kernel(self):
        with pytest.raises(ConfigurationError):
            qnn_spec(kernel=4)

    def test_cnn_requires_low_freq(self):
        with pytest.raises(ConfigurationError):
            nets.ModelSpec(family="cnn", rank="1d", depth=2, width=8, kernel=3,
                           query_channels=1, low_freq_channels=0,
                           output_channels=1)

    def test_mlp_rejects_residual_output(self):
        with pytest.raises(ConfigurationError):
            mlp_spec(residual_output=True)

    def test_unknown_family(self):
        with pytest.raises(ConfigurationError):
            mlp_spec(family="transformer")


class TestParameterCounts:
    def test_mlp_depth4_width256_closed_form(self):
        # 1*256+256  +  2*(256*256+256)  +  256*1+1
        spec = mlp_spec()
        expected = (1 * 256 + 256) + 2 * (256 * 256 + 256) + (256 * 1 + 1)
        assert nets.expected_param_count(spec) == expected == 132353
        model = nets.build_model(spec, 0)
        assert model.param_count() == expected

    def test_enumeration_matches_closed_form_across_specs(self):
        specs = [
            mlp_spec(depth=2, width=16),
            qnn_spec(depth=3, width=12),
            nets.ModelSpec(family="cnn", rank="2d", depth=4, width=10, kernel=3,
                           query_channels=2, low_freq_channels=3,
                           output_channels=3),
            qnn_spec(use_bias=False),
        ]
        for spec in specs:
            model = nets.build_model(spec, 1)
            assert model.param_count() == nets.expected_param_count(spec)

    def test_depth_one_qnn_is_single_conv(self):
        spec = qnn_spec(depth=1, width=7)
        model = nets.build_model(spec, 0)
        assert len(model.layers) == 1
        w, _ = model.layers[0]
        assert w.value.shape == (1, 2, 3)  # out=1, in=query+low=2, taps=3


class TestMatchedWidth:
    def test_one_dimensional_case(self):
        assert nets.matched_width(256, 3, "1d") == 148

    def test_two_dimensional_case(self):
        assert nets.matched_width(256, 3, "2d") == 85

    def test_kernel_one_is_identity(self):
        assert nets.matched_width(256, 1, "1d") == 256
        assert nets.matched_width(256, 1, "2d") == 256

    def test_too_small_width_rejected(self):
        with pytest.raises(ConfigurationError):
            nets.matched_width(1, 9, "2d")

    @pytest.mark.parametrize("rank,conv_width", [("1d", 148), ("2d", 85)])
    def test_total_param_ratio_within_one_percent(self, rank, conv_width):
        # Like-for-like: conv model vs MLP with identical in/out channels.
        in_ch, out_ch = (1, 1) if rank == "1d" else (2, 3)
        mlp = nets.ModelSpec(family="mlp", rank=rank, depth=4, width=256,
                             query_channels=in_ch, output_channels=out_ch)
        conv = nets.ModelSpec(family="qnn", rank=rank, depth=4,
                              width=conv_width, kernel=3,
                              query_channels=in_ch, low_freq_channels=0,
                              output_channels=out_ch)
        ratio = nets.expected_param_count(conv) / nets.expected_param_count(mlp)
        assert 0.99 <= ratio <= 1.01


class TestBuildAndForward:
    def test_untrained_residual_model_reproduces_low_freq(self):
        model = nets.build_model(qnn_spec(residual_output=True), 3)
        rng = np.random.default_rng(0)
        q = rng.random((1, 12))
        low = rng.random((1, 12))
        out = nets.forward(model, q, low)
        np.testing.assert_array_equal(out.data, low)

    def test_all_zero_mlp_outputs_zero(self):
        model = nets.build_model(mlp_spec(depth=2, width=8), 0)
        for p in model.parameters:
            p.assign(np.zeros(p.value.shape))
        out = nets.forward(model, np.random.default_rng(1).random((1, 6)))
        np.testing.assert_array_equal(out.data, np.zeros((6, 1)))

    def test_constant_input_gives_constant_interior(self):
        spec = qnn_spec(depth=3, width=6)
        model = nets.build_model(spec, 2)
        rng = np.random.default_rng(4)
        model.randomize(rng)
        n = 16
        q = np.full((1, n), 0.25)
        low = np.full((1, n), 0.5)
        out = nets.forward(model, q, low).data
        margin = 3 * 1  # depth-1 conv layers of radius 1... full receptive field
        interior = out[:, margin:n - margin]
        np.testing.assert_allclose(interior, interior[:, :1], rtol=0, atol=1e-12)

    def test_mlp_rejects_low_freq_input(self):
        model = nets.build_model(mlp_spec(depth=2, width=4), 0)
        with pytest.raises(ContractError):
            nets.forward(model, np.zeros((1, 4)), np.zeros((1, 4)))

    def test_qnn_requires_low_freq_input(self):
        model = nets.build_model(qnn_spec(), 0)
        with pytest.raises(ContractError):
            nets.forward(model, np.zeros((1, 4)))

    def test_kernel_one_low_free_qnn_equals_mlp_map(self):
        # conv with kernel 1 and no low-frequency input is an MLP in disguise:
        # copying weights across layouts must give the same forward map.
        mlp = nets.build_model(mlp_spec(depth=3, width=5), 0)
        conv = nets.build_model(
            qnn_spec(depth=3, width=5, kernel=1, low_freq_channels=0), 0)
        rng = np.random.default_rng(8)
        mlp.randomize(rng)
        for (wm, bm), (wc, bc) in zip(mlp.layers, conv.layers):
            wc.assign(wm.value.data.T[:, :, None])
            bc.assign(bm.value.data)
        q = np.random.default_rng(9).random((1, 7))
        out_mlp = nets.forward(mlp, q).data          # (N, 1)
        out_conv = nets.forward(conv, q).data        # (1, N)
        np.testing.assert_allclose(out_conv, out_mlp.T, atol=1e-12)

    def test_same_seed_same_draws_for_matching_shapes(self):
        a = nets.build_model(qnn_spec(), 5)
        b = nets.build_model(qnn_spec(), 5)
        for (wa, _), (wb, _) in zip(a.layers, b.layers):
            assert np.array_equal(wa.value.data, wb.value.data)

    def test_final_layer_starts_at_zero(self):
        model = nets.build_model(qnn_spec(), 1)
        w, b = model.layers[-1]
        assert not w.value.data.any()
        assert not b.value.data.any()

    def test_hidden_layers_start_within_fan_in_bound(self):
        model = nets.build_model(qnn_spec(), 1)
        for w, _ in model.layers[:-1]:
            fan_in = w.value.shape[1] * w.value.shape[2]
            assert np.abs(w.value.data).max() <= 1.0 / np.sqrt(fan_in)

    def test_translation_equivariance_of_low_only_cnn(self):
        spec = nets.ModelSpec(family="cnn", rank="1d", depth=3, width=6,
                              kernel=3, query_channels=1, low_freq_channels=1,
                              output_channels=1)
        model = nets.build_model(spec, 6)
        model.randomize(np.random.default_rng(7))
        n, shift = 32, 5
        low = np.random.default_rng(10).random((1, n))
        out = nets.forward(model, None, low).data
        out_shifted = nets.forward(model, None, np.roll(low, shift, axis=1)).data
        margin = 3 + shift  # receptive field radius plus the shift itself
        np.testing.assert_allclose(
            np.roll(out, shift, axis=1)[:, margin:n - margin],
            out_shifted[:, margin:n - margin], atol=1e-12)

    def test_one_gradient_step_decreases_loss(self):
        from qonv import training
        spec = qnn_spec(depth=2, width=6)
        model = nets.build_model(spec, 11)
        rng = np.random.default_rng(12)
        q = rng.random((1, 8))
        low = rng.random((1, 8))
        target = rng.random((1, 8))
        cfg = training.TrainConfig(iterations=1, lr=1e-2)
        trace = training.fit(model, q, low, target, cfg)
        assert trace[1] < trace[0]
