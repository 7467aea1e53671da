"""Image similarity metrics on arrays in [0, 1]."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from transpose_kit.autodiff.tensor import Array
from transpose_kit.errors import DimensionError

SSIM_SIGMA = 1.5
SSIM_WINDOW = 11
_TRUNCATE = (SSIM_WINDOW // 2) / SSIM_SIGMA  # radius 5 -> 11 taps
_K1, _K2 = 0.01, 0.03


def mse(a: Array, b: Array) -> float:
    """Mean squared error over every pixel of every sample."""
    if a.shape != b.shape:
        raise DimensionError(f"mse shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(diff * diff))


def _ssim_global(x: Array, y: Array, c1: float, c2: float) -> float:
    mu_x, mu_y = x.mean(), y.mean()
    var_x, var_y = x.var(), y.var()
    cov = ((x - mu_x) * (y - mu_y)).mean()
    return float(
        ((2 * mu_x * mu_y + c1) * (2 * cov + c2))
        / ((mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2))
    )


def _ssim_plane(x: Array, y: Array, c1: float, c2: float) -> float:
    if min(x.shape) < SSIM_WINDOW:
        return _ssim_global(x, y, c1, c2)

    def blur(z: Array) -> Array:
        return gaussian_filter(z, SSIM_SIGMA, truncate=_TRUNCATE, mode="reflect")

    mu_x, mu_y = blur(x), blur(y)
    var_x = blur(x * x) - mu_x * mu_x
    var_y = blur(y * y) - mu_y * mu_y
    cov = blur(x * y) - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    )
    pad = SSIM_WINDOW // 2
    return float(ssim_map[pad:-pad, pad:-pad].mean())


def ssim(a: Array, b: Array, data_range: float = 1.0) -> float:
    """
    Structural similarity of two images (`[H, W]` or `[C, H, W]`).

    Gaussian window of 11 taps with σ=1.5, C1=(0.01·L)², C2=(0.03·L)².
    Multi-channel images average the per-channel SSIM. Planes smaller than
    the window fall back to SSIM over global image statistics.
    """
    if a.shape != b.shape:
        raise DimensionError(f"ssim shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim not in (2, 3):
        raise DimensionError(f"ssim expects [H, W] or [C, H, W], got {a.shape}")
    c1, c2 = (_K1 * data_range) ** 2, (_K2 * data_range) ** 2
    x = np.asarray(a, dtype=np.float64).reshape(-1, *a.shape[-2:])
    y = np.asarray(b, dtype=np.float64).reshape(-1, *b.shape[-2:])
    return float(np.mean([_ssim_plane(px, py, c1, c2) for px, py in zip(x, y, strict=True)]))


def ssim_batch(a: Array, b: Array) -> Array:
    """Per-sample SSIM over two `[N, C, H, W]` stacks."""
    if a.shape != b.shape:
        raise DimensionError(f"ssim shape mismatch: {a.shape} vs {b.shape}")
    return np.array([ssim(x, y) for x, y in zip(a, b, strict=True)])


def per_sample_mse(a: Array, b: Array) -> Array:
    if a.shape != b.shape:
        raise DimensionError(f"mse shape mismatch: {a.shape} vs {b.shape}")
    if len(a) == 0:
        return np.zeros(0)
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return (diff * diff).reshape(len(a), -1).mean(axis=1)


__all__ = ["mse", "ssim", "ssim_batch", "per_sample_mse", "SSIM_WINDOW", "SSIM_SIGMA"]
