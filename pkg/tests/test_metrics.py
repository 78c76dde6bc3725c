import numpy as np
import pytest

from qonv import metrics
from qonv.errors import ConfigurationError, DimensionError

from _oracles import ssim_reference


class TestPsnr:
    def test_identical_inputs_give_infinity(self):
        x = np.random.default_rng(0).random((3, 4, 4))
        assert metrics.psnr(x, x) == float("inf")

    def test_twenty_db_point(self):
        pred = np.zeros(4)
        gt = np.full(4, 0.1)  # mse = 0.01 against zeros
        assert metrics.psnr(pred, gt, peak=1.0) == pytest.approx(20.0, abs=1e-12)

    def test_zero_db_point(self):
        assert metrics.psnr(np.zeros(5), np.ones(5), peak=1.0) == pytest.approx(0.0)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a, b = rng.random(10), rng.random(10)
        assert metrics.psnr(a, b) == metrics.psnr(b, a)

    def test_monotone_in_noise_level(self):
        rng = np.random.default_rng(2)
        gt = rng.random((3, 8, 8))
        values = []
        for std in (0.01, 0.02, 0.05):
            noisy = gt + std * np.random.default_rng(3).standard_normal(gt.shape)
            values.append(metrics.psnr(noisy, gt))
        assert values[0] > values[1] > values[2]

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            metrics.psnr(np.zeros(3), np.zeros(4))

    def test_peak_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            metrics.psnr(np.zeros(3), np.zeros(3), peak=0.0)


class TestSsim:
    def test_identical_images_score_one(self):
        x = np.random.default_rng(4).random((3, 16, 16))
        assert metrics.ssim(x, x) == 1.0

    def test_constant_shift_scores_below_one(self):
        rng = np.random.default_rng(5)
        gt = 0.25 + 0.5 * rng.random((3, 16, 16))
        value = metrics.ssim(gt + 0.2, gt)
        assert -1.0 < value < 1.0

    def test_matches_direct_definition_oracle(self):
        rng = np.random.default_rng(6)
        pred = rng.random((3, 16, 16))
        gt = np.clip(pred + 0.1 * rng.standard_normal(pred.shape), 0, 1)
        ours = metrics.ssim(pred, gt)
        reference = ssim_reference(pred, gt)
        assert abs(ours - reference) <= 1e-9

    def test_symmetry(self):
        rng = np.random.default_rng(7)
        a = rng.random((3, 16, 16))
        b = rng.random((3, 16, 16))
        assert metrics.ssim(a, b) == pytest.approx(metrics.ssim(b, a), abs=1e-12)

    def test_images_smaller_than_window_rejected(self):
        with pytest.raises(ConfigurationError):
            metrics.ssim(np.zeros((3, 8, 8)), np.zeros((3, 8, 8)))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            metrics.ssim(np.zeros((3, 16, 16)), np.zeros((3, 16, 17)))

    def test_masked_mean_selects_window_centers(self):
        rng = np.random.default_rng(8)
        pred = rng.random((3, 20, 20))
        gt = rng.random((3, 20, 20))
        full_map = metrics.ssim_map(pred, gt)
        mask = np.zeros((20, 20), dtype=bool)
        mask[7, 9] = True  # inside the valid region (margin 5)
        masked = metrics.ssim_masked(pred, gt, mask)
        assert masked == pytest.approx(full_map[2, 4], abs=1e-15)

    def test_masked_mean_requires_valid_pixels(self):
        pred = np.zeros((3, 16, 16))
        mask = np.zeros((16, 16), dtype=bool)
        mask[0, 0] = True  # outside the valid region
        with pytest.raises(ConfigurationError):
            metrics.ssim_masked(pred, pred, mask)


class TestMetricsReport:
    def test_mean_is_arithmetic_mean(self):
        report = metrics.MetricsReport(split="val",
                                       psnr_values=(30.0, 31.0, 35.0),
                                       ssim_values=(0.9, 0.92, 0.94))
        assert report.mean_psnr == pytest.approx(np.mean([30.0, 31.0, 35.0]),
                                                 abs=1e-12)
        assert report.mean_ssim == pytest.approx(np.mean([0.9, 0.92, 0.94]),
                                                 abs=1e-12)

    def test_missing_ssim_reports_nan(self):
        report = metrics.MetricsReport(split="train", psnr_values=(10.0,))
        assert np.isnan(report.mean_ssim)
