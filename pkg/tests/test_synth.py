import numpy as np
import pytest

from specfuse.errors import BadParams, ImageTooSmall, OffsetOutOfWindow, RadiusTooLarge
from specfuse.forward import ForwardPlan, apply_a, clip_boundary, convolve, sample
from specfuse.metrics import centroid_offset, kernel_centroid
from specfuse.regularizers import grayscale
from specfuse.synth import (
    SynthSpec,
    add_gaussian_noise,
    desk_problem,
    forward_replicated,
    make_dirac_kernel,
    make_disk_kernel,
    make_off_center_gaussian,
    make_problem,
    make_scene,
    shift_image,
)


def _in_simplex(k):
    return np.all(k >= 0) and abs(k.sum() - 1.0) <= 1e-12


def test_disk_kernel_examples():
    np.testing.assert_array_equal(make_disk_kernel((5, 5), 0.5), make_dirac_kernel((5, 5)))
    k = make_disk_kernel((41, 41), 6.0)
    count = sum(1 for i in range(-20, 21) for j in range(-20, 21) if i * i + j * j <= 36)
    assert np.count_nonzero(k) == count
    assert _in_simplex(k)
    c = kernel_centroid(k)
    assert abs(c[0] - 21) < 1e-12 and abs(c[1] - 21) < 1e-12
    with pytest.raises(RadiusTooLarge):
        make_disk_kernel((5, 5), 3.0)


def test_off_center_gaussian_examples():
    k = make_off_center_gaussian((41, 41), 3.0, (0, 0))
    assert np.allclose(centroid_offset(k), 0.0, atol=1e-12)
    k = make_off_center_gaussian((41, 41), 3.0, (5, 5))
    off = centroid_offset(k)
    assert abs(off[0] - 5) <= 0.1 and abs(off[1] - 5) <= 0.1
    assert _in_simplex(k)
    with pytest.raises(OffsetOutOfWindow):
        make_off_center_gaussian((11, 11), 2.0, (6, 0))
    with pytest.raises(BadParams):
        make_off_center_gaussian((11, 11), 0.0)


def _periodic_data(u, k, s):
    """Cyclic convolution on the lattice of ``u`` itself, then block averaging."""
    full = np.fft.ifft2(np.fft.fft2(u) * np.fft.fft2(_embed(k, u.shape))).real
    return sample(full, s)


def _embed(k, shape):
    out = np.zeros(shape)
    out[: k.shape[0], : k.shape[1]] = k
    return np.roll(out, (-(k.shape[0] // 2), -(k.shape[1] // 2)), axis=(0, 1))


def test_forward_replicated_dirac_equals_periodic():
    u = np.random.default_rng(0).random((12, 16))
    k = make_dirac_kernel((5, 5))
    np.testing.assert_allclose(forward_replicated(u, k, 4), _periodic_data(u, k, 4), atol=1e-12)
    np.testing.assert_allclose(forward_replicated(u, k, 4), sample(u, 4), atol=1e-12)


def test_forward_replicated_constant_image():
    k = make_disk_kernel((7, 7), 2.0)
    u = np.full((16, 16), 0.3)
    np.testing.assert_allclose(forward_replicated(u, k, 2), 0.3, atol=1e-12)
    np.testing.assert_allclose(_periodic_data(u, k, 2), 0.3, atol=1e-12)


def test_forward_replicated_interior_matches_periodic_border_differs():
    s, r = 2, (5, 5)
    k = make_disk_kernel(r, 2.0)
    yy, xx = np.mgrid[0:24, 0:24]
    ramp = (yy + 2.0 * xx) / 70.0
    rep = forward_replicated(ramp, k, s)
    per = _periodic_data(ramp, k, s)
    # data pixels whose blocks stay at least r away from every edge
    lo = int(np.ceil(r[0] / s))
    hi = rep.shape[0] - lo
    np.testing.assert_allclose(rep[lo:hi, lo:hi], per[lo:hi, lo:hi], atol=1e-10)
    assert np.max(np.abs(rep[0] - per[0])) > 1e-3


def test_forward_replicated_differs_from_solver_path():
    # the solver's operator on the full lattice with the truth crop (inverse crime)
    sp = desk_problem("disk", noise_variance=0.0)
    geo = sp.geometry
    raw = sp.truth_image * sp.data_scale + sp.data_offset
    solver = apply_a(raw, sp.truth_kernel, ForwardPlan(geo))
    used = forward_replicated(clip_boundary(raw, geo), sp.truth_kernel, geo.sampling)
    assert np.max(np.abs(solver - used)) > 1e-6


def test_add_gaussian_noise():
    f = np.random.default_rng(0).random((100, 100))
    np.testing.assert_array_equal(add_gaussian_noise(f, 0.0, 1), f)
    noisy = add_gaussian_noise(f, 0.001, 7)
    assert 0.00085 <= np.var(noisy - f) <= 0.00115
    np.testing.assert_array_equal(noisy, add_gaussian_noise(f, 0.001, 7))
    with pytest.raises(BadParams):
        add_gaussian_noise(f, -1.0, 0)


def test_shift_image_convention():
    v = np.arange(30.0).reshape(5, 6)
    out = shift_image(v, (1, 2))
    np.testing.assert_array_equal(out[:4, :4], v[1:, 2:])
    np.testing.assert_array_equal(out[4], np.concatenate([v[4, 2:], [v[4, 5]] * 2]))
    np.testing.assert_array_equal(shift_image(v, (0, 0)), v)


def test_make_problem_identity_chain():
    rgb = make_scene((20, 20), seed=1)
    spec = SynthSpec(kernel_kind="dirac", kernel_shape=(1, 1), sampling=1, data_shape=(20, 20),
                     noise_variance=0.0)
    p = make_problem(rgb, spec)
    np.testing.assert_allclose(p.f, clip_boundary(p.truth_image, p.geometry), atol=1e-14)
    # the scaling is min-max on the data and recorded
    assert p.f.min() == 0.0 and p.f.max() == 1.0
    np.testing.assert_allclose(p.data_offset + p.data_scale * p.truth_image, rgb[..., 0], atol=1e-14)
    np.testing.assert_array_equal(p.v, grayscale(rgb))


def test_make_problem_shift_and_kernel():
    rgb = make_scene((54, 54), seed=2)
    spec = SynthSpec(kernel_shape=(11, 11), data_shape=(11, 11), side_info_shift=(5, 5))
    p = make_problem(rgb, spec)
    np.testing.assert_array_equal(p.v, shift_image(grayscale(rgb), (5, 5)))
    np.testing.assert_array_equal(p.registered_truth, shift_image(p.truth_image, (5, 5)))
    assert _in_simplex(p.truth_kernel)
    assert np.allclose(centroid_offset(p.truth_kernel), 0.0, atol=1e-12)
    assert p.f.shape == (11, 11) and p.v.shape == (54, 54)
    assert p.metadata()["spec"]["side_info_shift"] == (5, 5)


def test_make_problem_deterministic():
    rgb = make_scene((54, 54), seed=3)
    spec = SynthSpec(kernel_shape=(11, 11), data_shape=(11, 11), random_seed=9)
    a, b = make_problem(rgb, spec), make_problem(rgb, spec)
    assert a.f.tobytes() == b.f.tobytes()
    assert make_scene((30, 40), 5).tobytes() == make_scene((30, 40), 5).tobytes()


def test_make_problem_errors():
    with pytest.raises(ImageTooSmall):
        make_problem(make_scene((20, 20)), SynthSpec(kernel_shape=(11, 11), data_shape=(11, 11)))
    with pytest.raises(BadParams):
        SynthSpec(kernel_kind="square")
    with pytest.raises(BadParams):
        desk_problem("square")


def test_generated_kernels_in_simplex():
    for kind in ("disk", "gaussian", "dirac"):
        assert _in_simplex(SynthSpec(kernel_kind=kind, kernel_shape=(15, 15)).kernel())
    custom = SynthSpec(kernel_kind="custom", kernel_shape=(3, 3),
                       custom_kernel=tuple(map(tuple, np.ones((3, 3)))))
    np.testing.assert_allclose(custom.kernel(), 1 / 9, atol=1e-15)


def test_desk_instances():
    disk = desk_problem("disk")
    assert disk.geometry.image_shape == (110, 110)
    assert disk.spec.side_info_shift == (5, 5)
    gauss = desk_problem("gaussian")
    off = centroid_offset(gauss.truth_kernel)
    assert gauss.spec.side_info_shift == (0, 0)
    assert abs(off[0] - gauss.spec.kernel_offset[0]) < 0.5
    assert np.array_equal(convolve(np.ones(disk.geometry.image_shape), disk.truth_kernel,
                                   ForwardPlan(disk.geometry)).round(12),
                          np.ones(disk.geometry.image_shape))
