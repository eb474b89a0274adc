"""Similarity measures against a known ground truth and kernel centroids."""

import math
from typing import NamedTuple, Tuple

import numpy as np
from scipy import ndimage

from .core import as_image
from .errors import NotNormalized, ShapeMismatch

__all__ = [
    "SimilarityReport",
    "ssim",
    "mse",
    "psnr",
    "similarity_report",
    "kernel_centroid",
    "centroid_offset",
]

SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11 x 11 window
K1, K2 = 0.01, 0.03


class SimilarityReport(NamedTuple):
    ssim: float
    mse: float
    psnr: float


def _gaussian_window():
    t = np.arange(-SSIM_RADIUS, SSIM_RADIUS + 1, dtype=np.float64)
    g = np.exp(-(t**2) / (2.0 * SSIM_SIGMA**2))
    g /= g.sum()
    return g


def _filter(x, g):
    # separable 'valid' filtering
    x = ndimage.correlate1d(x, g, axis=0, mode="constant")
    x = ndimage.correlate1d(x, g, axis=1, mode="constant")
    r = SSIM_RADIUS
    return x[r:-r, r:-r]


def ssim(x, y, dynamic_range: float = 1.0) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Statistics are evaluated where the window fits entirely inside the
    image; both inputs must therefore be at least 11 pixels on each side.
    """
    x = as_image(x, "x")
    y = as_image(y, "y")
    if x.shape != y.shape:
        raise ShapeMismatch(f"cannot compare shapes {x.shape} and {y.shape}")
    if min(x.shape) < 2 * SSIM_RADIUS + 1:
        raise ShapeMismatch(f"images must be at least 11x11 for SSIM, got {x.shape}")
    if not dynamic_range > 0:
        raise ValueError("dynamic range must be positive")
    c1 = (K1 * dynamic_range) ** 2
    c2 = (K2 * dynamic_range) ** 2
    g = _gaussian_window()
    mu_x, mu_y = _filter(x, g), _filter(y, g)
    var_x = _filter(x * x, g) - mu_x * mu_x
    var_y = _filter(y * y, g) - mu_y * mu_y
    cov = _filter(x * y, g) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def mse(x, y) -> float:
    x, y = as_image(x, "x"), as_image(y, "y")
    if x.shape != y.shape:
        raise ShapeMismatch(f"cannot compare shapes {x.shape} and {y.shape}")
    return float(np.mean((x - y) ** 2))


def psnr(x, y, dynamic_range: float = 1.0) -> float:
    err = mse(x, y)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(dynamic_range**2 / err)


def similarity_report(x, y, dynamic_range: float = 1.0) -> SimilarityReport:
    return SimilarityReport(ssim(x, y, dynamic_range), mse(x, y), psnr(x, y, dynamic_range))


def kernel_centroid(k) -> Tuple[float, float]:
    """Mass center ``sum_i i k_i`` in 1-based tap coordinates (row, col)."""
    k = as_image(k, "kernel")
    total = float(k.sum())
    if abs(total - 1.0) > 1e-9:
        raise NotNormalized(f"kernel sums to {total!r}, not 1")
    i = np.arange(1, k.shape[0] + 1)
    j = np.arange(1, k.shape[1] + 1)
    return float(np.sum(k.sum(axis=1) * i)), float(np.sum(k.sum(axis=0) * j))


def centroid_offset(k) -> Tuple[float, float]:
    """Centroid minus the center tap ``l + 1``."""
    c1, c2 = kernel_centroid(k)
    k = np.asarray(k)
    return c1 - (k.shape[0] + 1) / 2.0, c2 - (k.shape[1] + 1) / 2.0
