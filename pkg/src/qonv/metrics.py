"""Reconstruction fidelity metrics: PSNR and single-scale SSIM.

SSIM follows the canonical recipe: an 11x11 Gaussian window with sigma 1.5,
stability constants K1=0.01 and K2=0.03 at dynamic range 1.0, statistics
aggregated over the valid (unpadded) region, channels averaged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(pred, gt, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the inputs are identical."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DimensionError(f"psnr: shapes {pred.shape} and {gt.shape} differ")
    if peak <= 0:
        raise ConfigurationError(f"psnr peak must be positive, got {peak}")
    mse = float(np.mean((pred - gt) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)


def _ssim_window() -> np.ndarray:
    offsets = np.arange(SSIM_WINDOW) - (SSIM_WINDOW - 1) / 2
    g = np.exp(-0.5 * (offsets / SSIM_SIGMA) ** 2)
    return g / g.sum()


def _filter_valid(x: np.ndarray, window: np.ndarray) -> np.ndarray:
    # Separable valid-mode correlation along the last two axes.
    for axis in (-1, -2):
        moved = np.moveaxis(x, axis, -1)
        length = moved.shape[-1] - window.size + 1
        out = np.zeros(moved.shape[:-1] + (length,))
        for i, weight in enumerate(window):
            out += weight * moved[..., i:i + length]
        x = np.moveaxis(out, -1, axis)
    return x


def ssim_map(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Per-location SSIM over the valid region, channels averaged.

    Inputs are (C, H, W); the result is (H - 10, W - 10).
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DimensionError(f"ssim: shapes {pred.shape} and {gt.shape} differ")
    if pred.ndim != 3:
        raise DimensionError(f"ssim expects (C, H, W), got {pred.shape}")
    if min(pred.shape[1], pred.shape[2]) < SSIM_WINDOW:
        raise ConfigurationError(
            f"ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, "
            f"got {pred.shape[1]}x{pred.shape[2]}"
        )
    window = _ssim_window()
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_p = _filter_valid(pred, window)
    mu_g = _filter_valid(gt, window)
    var_p = _filter_valid(pred * pred, window) - mu_p * mu_p
    var_g = _filter_valid(gt * gt, window) - mu_g * mu_g
    cov = _filter_valid(pred * gt, window) - mu_p * mu_g
    num = (2.0 * mu_p * mu_g + c1) * (2.0 * cov + c2)
    den = (mu_p * mu_p + mu_g * mu_g + c1) * (var_p + var_g + c2)
    return (num / den).mean(axis=0)


def ssim(pred, gt) -> float:
    """Mean single-scale SSIM between two (C, H, W) images."""
    return float(ssim_map(pred, gt).mean())


def ssim_masked(pred, gt, sample_mask) -> float:
    """Mean of the SSIM map over window centers selected by a pixel mask."""
    smap = ssim_map(pred, gt)
    margin = (SSIM_WINDOW - 1) // 2
    mask = np.asarray(sample_mask, dtype=bool)
    if mask.shape != (smap.shape[0] + 2 * margin, smap.shape[1] + 2 * margin):
        raise DimensionError(
            f"mask {mask.shape} does not cover the image the map came from"
        )
    inner = mask[margin:-margin, margin:-margin]
    if not inner.any():
        raise ConfigurationError("mask selects no valid-region pixels")
    return float(smap[inner].mean())


@dataclass(frozen=True)
class MetricsReport:
    """Per-item metric values for one split, with their arithmetic means."""

    split: str
    psnr_values: tuple = ()
    ssim_values: tuple = ()

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr_values))

    @property
    def mean_ssim(self) -> float:
        if not self.ssim_values:
            return float("nan")
        return float(np.mean(self.ssim_values))
