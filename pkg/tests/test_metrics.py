import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.metrics import structural_similarity

from specfuse.errors import NotNormalized, ShapeMismatch
from specfuse.metrics import (
    centroid_offset,
    kernel_centroid,
    mse,
    psnr,
    similarity_report,
    ssim,
)
from specfuse.solvers import gaussian_init_kernel
from specfuse.synth import make_disk_kernel


def _skimage_ssim(x, y, data_range=1.0):
    return structural_similarity(x, y, data_range=data_range, gaussian_weights=True, sigma=1.5,
                                 use_sample_covariance=False)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ssim_matches_reference_implementation(seed):
    rng = np.random.default_rng(seed)
    x = rng.random((40, 33))
    y = np.clip(x + 0.1 * rng.standard_normal(x.shape), 0, 1)
    assert abs(ssim(x, y) - _skimage_ssim(x, y)) <= 1e-10


def test_ssim_examples():
    x = np.random.default_rng(3).random((20, 20))
    assert ssim(x, x) == 1.0
    board = (np.indices((24, 24)).sum(axis=0) % 2).astype(float)
    assert ssim(board, 1.0 - board) < -0.5
    assert ssim(x, x + 0.1) < 1.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ssim_symmetric_and_transpose_invariant(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.random((2, 16, 19))
    assert abs(ssim(x, y) - ssim(y, x)) <= 1e-12
    assert abs(ssim(x, y) - ssim(x.T, y.T)) <= 1e-12


def test_ssim_errors():
    with pytest.raises(ShapeMismatch):
        ssim(np.zeros((12, 12)), np.zeros((12, 13)))
    with pytest.raises(ShapeMismatch):
        ssim(np.zeros((10, 30)), np.zeros((10, 30)))


def test_mse_and_psnr():
    x = np.random.default_rng(4).random((12, 12))
    assert mse(x, x) == 0.0 and psnr(x, x) == math.inf
    assert mse(x, x + 0.1) == pytest.approx(0.01)
    assert psnr(x, x + 0.1) == pytest.approx(20.0)
    report = similarity_report(x, x)
    assert report.ssim == 1.0 and report.mse == 0.0


def test_centroid_examples():
    k = gaussian_init_kernel((9, 11), 1.5)
    c = kernel_centroid(k)
    assert abs(c[0] - 5.0) < 1e-12 and abs(c[1] - 6.0) < 1e-12
    d = np.zeros((7, 7))
    d[2, 4] = 1.0
    assert kernel_centroid(d) == (3.0, 5.0)
    disk = make_disk_kernel((21, 21), 3.0)
    shifted = np.roll(disk, (5, 5), axis=(0, 1))
    off = centroid_offset(shifted)
    assert abs(off[0] - 5.0) < 1e-12 and abs(off[1] - 5.0) < 1e-12
    with pytest.raises(NotNormalized):
        kernel_centroid(2 * k)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_centroid_is_affine(seed, t):
    rng = np.random.default_rng(seed)
    a, b = rng.random((2, 5, 7))
    a /= a.sum()
    b /= b.sum()
    mix = t * a + (1 - t) * b
    mix /= mix.sum()
    ca, cb, cm = kernel_centroid(a), kernel_centroid(b), kernel_centroid(mix)
    for i in range(2):
        assert abs(cm[i] - (t * ca[i] + (1 - t) * cb[i])) < 1e-12
