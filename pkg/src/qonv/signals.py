"""Synthetic signal generation and frequency-domain splitting.

The 1D generator draws a Gaussian spectrum, damps entry j by 1/j^alpha, and
takes the real part of the inverse DFT; every spectral bin is populated so
the result is not band limited. An ideal (brick-wall) DFT filter splits any
signal into low and high parts that sum back exactly. The 2D path builds a
low-frequency stand-in from a Gaussian blur of a reference image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class SignalPair:
    """A 1D target with its low/high split and the query grid."""

    coords: np.ndarray   # (1, N) positions in [0, 1)
    full: np.ndarray     # (1, N)
    low: np.ndarray      # (1, N)
    high: np.ndarray     # (1, N)
    cutoff: float


@dataclass(frozen=True)
class ImagePair:
    """An RGB target, its blurred low-frequency version, and the pixel grid."""

    coords: np.ndarray        # (2, H, W) with (u, v) = (col/W, row/H)
    ground_truth: np.ndarray  # (3, H, W) in [0, 1]
    low: np.ndarray           # (3, H, W) in [0, 1]
    blur_sigma: float


def gen_one_over_f(n: int, alpha: float, seed: int) -> np.ndarray:
    """Random 1/f^alpha signal of length n, zero mean, max-abs one."""
    if n < 2:
        raise ConfigurationError(f"signal length must be >= 2, got {n}")
    if alpha < 0:
        raise ConfigurationError(f"alpha must be >= 0, got {alpha}")
    rng = np.random.default_rng(seed)
    spectrum = rng.standard_normal(n) / (np.arange(1, n + 1) ** alpha)
    x = np.fft.ifft(spectrum).real
    x = x - x.mean()
    peak = np.abs(x).max()
    if peak > 0:
        x = x / peak
    return x


def _band_mask(n: int, cutoff: float) -> np.ndarray:
    idx = np.arange(n)
    normalized = np.minimum(idx, n - idx) / n
    return normalized <= cutoff


def lowpass_split(x: np.ndarray, cutoff: float):
    """Split a real signal at a normalized frequency with an ideal DFT filter."""
    if not 0.0 < cutoff <= 0.5:
        raise ConfigurationError(f"cutoff must be in (0, 0.5], got {cutoff}")
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    spectrum = np.fft.fft(x)
    low = np.fft.ifft(spectrum * _band_mask(n, cutoff)).real
    return low, x - low


def sample_coords(n: int = 0, rank: str = "1d", dims=None) -> np.ndarray:
    """Evenly spaced query positions in [0, 1) per axis.

    1d: (1, n) with values k/n. 2d: (2, H, W) where channel 0 is col/W and
    channel 1 is row/H.
    """
    if rank == "1d":
        if n < 1:
            raise ConfigurationError(f"need a positive point count, got {n}")
        return (np.arange(n) / n)[None, :]
    if rank == "2d":
        if dims is None or len(dims) != 2 or min(dims) < 1:
            raise ConfigurationError(f"2d coords need positive (H, W), got {dims}")
        h, w = dims
        u = np.broadcast_to(np.arange(w) / w, (h, w))
        v = np.broadcast_to((np.arange(h) / h)[:, None], (h, w))
        return np.stack([u, v], axis=0)
    raise ConfigurationError(f"unknown rank {rank!r}")


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized discrete Gaussian with radius ceil(3*sigma)."""
    radius = int(np.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    return kernel / kernel.sum()


def _blur_axis(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = (kernel.size - 1) // 2
    moved = np.moveaxis(img, axis, -1)
    padded = np.concatenate(
        [np.repeat(moved[..., :1], radius, axis=-1),
         moved,
         np.repeat(moved[..., -1:], radius, axis=-1)],
        axis=-1,
    )
    out = np.zeros_like(moved)
    for i, weight in enumerate(kernel):
        out += weight * padded[..., i:i + moved.shape[-1]]
    return np.moveaxis(out, -1, axis)


def blur_image(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge replication, clamped to [0, 1]."""
    if sigma <= 0:
        raise ConfigurationError(f"blur sigma must be positive, got {sigma}")
    img = np.asarray(img, dtype=np.float64)
    kernel = gaussian_kernel_1d(sigma)
    out = _blur_axis(img, kernel, axis=-1)
    out = _blur_axis(out, kernel, axis=-2)
    return np.clip(out, 0.0, 1.0)


def make_signal_pair(n: int, alpha: float, cutoff: float, seed: int) -> SignalPair:
    full = gen_one_over_f(n, alpha, seed)
    low, high = lowpass_split(full, cutoff)
    return SignalPair(coords=sample_coords(n, "1d"),
                      full=full[None, :], low=low[None, :],
                      high=high[None, :], cutoff=cutoff)


def make_image_pair(ground_truth: np.ndarray, blur_sigma: float) -> ImagePair:
    gt = np.asarray(ground_truth, dtype=np.float64)
    if gt.ndim != 3 or gt.shape[0] != 3:
        raise ConfigurationError(f"expected a (3, H, W) image, got {gt.shape}")
    low = blur_image(gt, blur_sigma)
    coords = sample_coords(rank="2d", dims=gt.shape[1:])
    return ImagePair(coords=coords, ground_truth=gt, low=low,
                     blur_sigma=blur_sigma)
