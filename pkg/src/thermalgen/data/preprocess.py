"""Preprocessing of raw RGB frames and raw thermal frames into model inputs.

All functions are pure and operate on NumPy arrays. The pipeline mirrors the
data collection setup: RGB frames are block-averaged down to the target
resolution and mapped to [-1, 1]; thermal frames are blurred, perturbed with
Gaussian noise, block-averaged down to the heatmap resolution, clamped to a
fixed temperature range and mapped to [-1, 1]. The fixed range (rather than
per-frame min/max) keeps absolute temperature information comparable across
frames.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
from scipy.ndimage import convolve1d

from ..errors import ConfigError, DimensionError

RGB_SOURCE_RANGE = (0.0, 255.0)


def block_average(values: np.ndarray, target_hw: Tuple[int, int]) -> np.ndarray:
    """Downsample by averaging non-overlapping blocks (pixel averaging).

    The source spatial dims must be integer multiples of the target dims; the
    per-axis ratios may differ. Trailing channel axes are preserved.
    """
    th, tw = target_hw
    if values.ndim < 2:
        raise DimensionError(f"expected at least 2-D input, got shape {values.shape}")
    sh, sw = values.shape[:2]
    if th < 1 or tw < 1:
        raise DimensionError(f"target dims must be >= 1, got {target_hw}")
    if sh % th != 0 or sw % tw != 0:
        raise DimensionError(
            f"source dims ({sh}, {sw}) are not integer multiples of target {target_hw}"
        )
    rh, rw = sh // th, sw // tw
    reshaped = values.reshape((th, rh, tw, rw) + values.shape[2:])
    return reshaped.mean(axis=(1, 3))


def normalize_to_unit(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Affinely map [lo, hi] onto [-1, 1]."""
    if lo >= hi:
        raise ConfigError(f"normalization range requires lo < hi, got ({lo}, {hi})")
    return (values - lo) * (2.0 / (hi - lo)) - 1.0


def denormalize_from_unit(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Inverse of :func:`normalize_to_unit`."""
    if lo >= hi:
        raise ConfigError(f"normalization range requires lo < hi, got ({lo}, {hi})")
    return (values + 1.0) * ((hi - lo) / 2.0) + lo


def gaussian_kernel(size: int) -> np.ndarray:
    """1-D normalized Gaussian kernel of odd length ``size``.

    The standard deviation follows the usual kernel-size rule
    sigma = 0.3 * ((size - 1) / 2 - 1) + 0.8, so size 1 degenerates to the
    identity kernel.
    """
    if size < 1 or size % 2 == 0:
        raise ConfigError(f"kernel size must be odd and positive, got {size}")
    if size == 1:
        return np.ones(1)
    radius = (size - 1) // 2
    sigma = 0.3 * (radius - 1) + 0.8
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    return kernel / kernel.sum()


def gaussian_blur(values: np.ndarray, size: int) -> np.ndarray:
    """Separable Gaussian blur with an explicit kernel of length ``size``."""
    kernel = gaussian_kernel(size)
    if kernel.size == 1:
        return values.astype(np.float64, copy=True)
    out = convolve1d(values.astype(np.float64), kernel, axis=0, mode="reflect")
    out = convolve1d(out, kernel, axis=1, mode="reflect")
    return out


def preprocess_rgb(raw: np.ndarray, target_hw: Tuple[int, int]) -> np.ndarray:
    """Raw color frame ([0, 255], H x W x 3) -> normalized (target, 3) in [-1, 1]."""
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise DimensionError(f"expected H x W x 3 RGB input, got shape {raw.shape}")
    averaged = block_average(raw.astype(np.float64), target_hw)
    out = normalize_to_unit(averaged, *RGB_SOURCE_RANGE)
    return out.astype(np.float32)


def preprocess_thermal(
    raw: np.ndarray,
    blur_kernel: int,
    noise_sigma: float,
    target_hw: Tuple[int, int],
    norm_range: Tuple[float, float],
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Raw thermal frame -> heatmap of shape (target_h, target_w, 1) in [-1, 1].

    Pipeline order: Gaussian blur -> additive Gaussian noise -> pixel-average
    downsample -> clamp to ``norm_range`` -> affine map to [-1, 1]. The noise
    draw comes from ``rng`` (ignored when sigma is 0), so results are
    reproducible given the caller's generator state.
    """
    if raw.ndim == 3 and raw.shape[2] == 1:
        raw = raw[:, :, 0]
    if raw.ndim != 2:
        raise DimensionError(f"expected 2-D thermal input, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise DimensionError("thermal frame contains non-finite values")
    if noise_sigma < 0:
        raise ConfigError(f"noise_sigma must be >= 0, got {noise_sigma}")
    t_min, t_max = norm_range
    if t_min >= t_max:
        raise ConfigError(f"norm_range requires t_min < t_max, got {norm_range}")

    out = gaussian_blur(raw, blur_kernel)
    if noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        out = out + rng.normal(0.0, noise_sigma, size=out.shape)
    out = block_average(out, target_hw)
    out = np.clip(out, t_min, t_max)
    out = normalize_to_unit(out, t_min, t_max)
    return out[:, :, np.newaxis].astype(np.float32)


def resize_mask(mask: np.ndarray, threshold: float = 0.5, block: int = 8) -> np.ndarray:
    """Downscale a binary person mask to heatmap resolution.

    Each output cell is 1 iff the mean of its ``block`` x ``block`` source
    block strictly exceeds ``threshold`` (area rule). Output is float32 binary.
    """
    if mask.ndim == 3 and mask.shape[2] == 1:
        mask = mask[:, :, 0]
    if mask.ndim != 2:
        raise DimensionError(f"expected 2-D mask, got shape {mask.shape}")
    sh, sw = mask.shape
    if sh % block != 0 or sw % block != 0:
        raise DimensionError(
            f"mask dims {mask.shape} are not multiples of the block size {block}"
        )
    means = block_average(mask.astype(np.float64), (sh // block, sw // block))
    return (means > threshold).astype(np.float32)
