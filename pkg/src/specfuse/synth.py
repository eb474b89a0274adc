"""Ground-truth test problems with known image and kernel.

The red channel of an RGB image is blurred with a known kernel under
edge-replicated (not periodic) boundary conditions, block averaged and
corrupted by Gaussian noise.  The side information is the grayscale
version of the same RGB image, optionally translated.

Shift convention: a side-information shift ``t`` samples the grayscale
image at ``x + t``.  A reconstruction that follows the side information is
then displaced by ``-t`` and the estimated kernel compensates with a
centroid offset of ``+t`` taps.
"""

from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .core import ProblemGeometry, as_image, geometry_from
from .errors import (
    BadParams,
    EvenKernel,
    ImageTooSmall,
    OffsetOutOfWindow,
    RadiusTooLarge,
    ShapeMismatch,
)
from .forward import clip_boundary, sample
from .regularizers import grayscale, project_simplex

__all__ = [
    "KERNEL_KINDS",
    "SynthSpec",
    "SynthProblem",
    "make_disk_kernel",
    "make_off_center_gaussian",
    "make_dirac_kernel",
    "forward_replicated",
    "add_gaussian_noise",
    "shift_image",
    "make_scene",
    "make_problem",
    "desk_problem",
]

KERNEL_KINDS = ("disk", "gaussian", "dirac", "custom")


def _odd_shape(shape):
    r1, r2 = (int(v) for v in shape)
    if r1 % 2 == 0 or r2 % 2 == 0 or r1 < 1 or r2 < 1:
        raise EvenKernel(f"kernel sides must be odd and positive, got {(r1, r2)}")
    return r1, r2


def _tap_offsets(shape):
    r1, r2 = shape
    i = np.arange(r1) - (r1 - 1) // 2
    j = np.arange(r2) - (r2 - 1) // 2
    return i[:, None], j[None, :]


def make_dirac_kernel(shape) -> np.ndarray:
    r1, r2 = _odd_shape(shape)
    k = np.zeros((r1, r2))
    k[(r1 - 1) // 2, (r2 - 1) // 2] = 1.0
    return k


def make_disk_kernel(shape, radius: float) -> np.ndarray:
    """Normalized indicator of the taps within ``radius`` of the center."""
    shape = _odd_shape(shape)
    if not radius > 0:
        raise BadParams(f"radius must be positive, got {radius}")
    if radius > min((shape[0] - 1) // 2, (shape[1] - 1) // 2) and radius >= 1:
        raise RadiusTooLarge(f"radius {radius} does not fit into a {shape} window")
    i, j = _tap_offsets(shape)
    k = (i**2 + j**2 <= radius**2).astype(np.float64)
    return k / k.sum()


def make_off_center_gaussian(shape, sigma: float, offset=(5, 5)) -> np.ndarray:
    """Gaussian centered at ``center + offset``, truncated and normalized."""
    shape = _odd_shape(shape)
    if not sigma > 0:
        raise BadParams(f"sigma must be positive, got {sigma}")
    o1, o2 = (float(v) for v in offset)
    l1, l2 = (shape[0] - 1) // 2, (shape[1] - 1) // 2
    if abs(o1) > l1 or abs(o2) > l2:
        raise OffsetOutOfWindow(f"offset {offset} leaves the {shape} window")
    i, j = _tap_offsets(shape)
    k = np.exp(-((i - o1) ** 2 + (j - o2) ** 2) / (2.0 * sigma**2))
    return project_simplex(k / k.sum())


def forward_replicated(u, k, s: int) -> np.ndarray:
    """Blur with edge-replicated boundaries at the same size, then block average.

    ``u`` is an image of the meaningful size ``s n``.  Away from the border
    (farther than the kernel radius) this agrees with periodic convolution.
    """
    u = as_image(u)
    k = as_image(k, "kernel")
    _odd_shape(k.shape)
    if u.shape[0] % s or u.shape[1] % s:
        raise ShapeMismatch(f"image shape {u.shape} is not divisible by s={s}")
    blurred = ndimage.convolve(u, k, mode="nearest")
    return sample(blurred, s)


def add_gaussian_noise(f, variance: float, seed: int) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise; no clipping."""
    if variance < 0:
        raise BadParams(f"noise variance must be nonnegative, got {variance}")
    f = np.asarray(f, dtype=np.float64)
    if variance == 0:
        return f.copy()
    rng = np.random.default_rng(seed)
    return f + rng.normal(0.0, np.sqrt(variance), size=f.shape)


def shift_image(v, shift) -> np.ndarray:
    """Integer translation ``out[x] = v[x + shift]`` with edge replication."""
    t1, t2 = (int(t) for t in shift)
    p1, p2 = abs(t1), abs(t2)
    padded = np.pad(v, ((p1, p1), (p2, p2)), mode="edge")
    return padded[p1 + t1 : p1 + t1 + v.shape[0], p2 + t2 : p2 + t2 + v.shape[1]].copy()


def make_scene(shape, seed: int = 0, n_shapes: int = 60) -> np.ndarray:
    """Synthetic RGB scene of overlapping colored disks, rectangles and stripes.

    Returned as ``(rows, cols, 3)`` in ``[0, 1]``.  Channels share edges but
    not intensities, which is the situation the side information models.
    """
    rows, cols = (int(v) for v in shape)
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)
    img = np.empty((rows, cols, 3))
    base = rng.uniform(0.2, 0.6, size=3)
    tilt = rng.uniform(-0.15, 0.15, size=(3, 2))
    for c in range(3):
        img[..., c] = base[c] + tilt[c, 0] * yy / rows + tilt[c, 1] * xx / cols
    scale = min(rows, cols)
    for _ in range(n_shapes):
        color = rng.uniform(0.0, 1.0, size=3)
        kind = rng.integers(3)
        cy, cx = rng.uniform(0, rows), rng.uniform(0, cols)
        if kind == 0:
            rad = rng.uniform(0.03, 0.15) * scale
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= rad**2
        elif kind == 1:
            h, w = rng.uniform(0.04, 0.25, size=2) * scale
            angle = rng.uniform(0, np.pi)
            dy, dx = yy - cy, xx - cx
            a = dy * np.cos(angle) + dx * np.sin(angle)
            b = -dy * np.sin(angle) + dx * np.cos(angle)
            mask = (np.abs(a) <= h / 2) & (np.abs(b) <= w / 2)
        else:
            angle = rng.uniform(0, np.pi)
            width = rng.uniform(0.01, 0.04) * scale
            dist = (yy - cy) * np.cos(angle) + (xx - cx) * np.sin(angle)
            mask = np.abs(dist) <= width
        img[mask] = color
    return np.clip(img, 0.0, 1.0)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one simulated problem.

    ``kernel_param`` is the disk radius or Gaussian sigma (``None`` selects
    ``r / 6`` and ``r / 8``); ``kernel_offset`` only applies to the
    Gaussian.  ``custom_kernel`` supplies the kernel for kind ``custom``.
    """

    kernel_kind: str = "disk"
    kernel_shape: Tuple[int, int] = (41, 41)
    sampling: int = 4
    data_shape: Tuple[int, int] = (100, 100)
    noise_variance: float = 0.001
    side_info_shift: Tuple[int, int] = (0, 0)
    random_seed: int = 0
    kernel_param: Optional[float] = None
    kernel_offset: Tuple[float, float] = (5.0, 5.0)
    crop_origin: Tuple[int, int] = (0, 0)
    custom_kernel: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kernel_kind not in KERNEL_KINDS:
            raise BadParams(f"kernel kind must be one of {KERNEL_KINDS}, got {self.kernel_kind!r}")
        _odd_shape(self.kernel_shape)
        if self.noise_variance < 0:
            raise BadParams("noise variance must be nonnegative")

    @property
    def geometry(self) -> ProblemGeometry:
        return geometry_from(self.data_shape, self.kernel_shape, self.sampling)

    def kernel(self) -> np.ndarray:
        r = self.kernel_shape
        if self.kernel_kind == "disk":
            radius = self.kernel_param if self.kernel_param is not None else min(r) / 6.0
            return make_disk_kernel(r, radius)
        if self.kernel_kind == "gaussian":
            sigma = self.kernel_param if self.kernel_param is not None else min(r) / 8.0
            return make_off_center_gaussian(r, sigma, self.kernel_offset)
        if self.kernel_kind == "dirac":
            return make_dirac_kernel(r)
        if self.custom_kernel is None:
            raise BadParams("kernel kind 'custom' needs custom_kernel")
        k = np.asarray(self.custom_kernel, dtype=np.float64)
        if k.shape != tuple(r):
            raise ShapeMismatch(f"custom kernel has shape {k.shape}, expected {r}")
        return project_simplex(k)

    def to_dict(self):
        d = asdict(self)
        d["custom_kernel"] = None if self.custom_kernel is None else np.asarray(
            self.custom_kernel).tolist()
        return d


@dataclass
class SynthProblem:
    """Simulated data ``f``, side information ``v`` and the ground truth.

    ``truth_image`` lives on the full reconstruction lattice and is expressed
    in the same ``[0, 1]`` scaling as ``f``; ``data_offset`` and
    ``data_scale`` undo that scaling (``raw = offset + scale * value``).
    """

    f: np.ndarray
    v: np.ndarray
    truth_image: np.ndarray
    truth_kernel: np.ndarray
    spec: SynthSpec
    data_offset: float
    data_scale: float

    @property
    def geometry(self) -> ProblemGeometry:
        return self.spec.geometry

    @property
    def truth_meaningful(self) -> np.ndarray:
        return clip_boundary(self.truth_image, self.geometry)

    @property
    def registered_truth(self) -> np.ndarray:
        """Ground truth translated like the side information.

        A reconstruction guided by shifted side information follows the
        side information, so this is the reference it should be compared
        against; it equals ``truth_image`` when there is no shift.
        """
        return shift_image(self.truth_image, self.spec.side_info_shift)

    @property
    def registered_truth_meaningful(self) -> np.ndarray:
        return clip_boundary(self.registered_truth, self.geometry)

    def metadata(self):
        return {
            "spec": self.spec.to_dict(),
            "data_offset": self.data_offset,
            "data_scale": self.data_scale,
            "image_shape": list(self.geometry.image_shape),
            "shift_convention": "v[x] = gray[x + shift]; kernel centroid offset = +shift",
        }


def make_problem(rgb, spec: SynthSpec) -> SynthProblem:
    """Simulate data from the red channel of ``rgb`` (``(rows, cols, 3)`` in [0, 1])."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[-1] != 3:
        raise ShapeMismatch(f"expected an RGB image of shape (rows, cols, 3), got {rgb.shape}")
    geo = spec.geometry
    m1, m2 = geo.image_shape
    o1, o2 = spec.crop_origin
    if o1 < 0 or o2 < 0 or rgb.shape[0] < o1 + m1 or rgb.shape[1] < o2 + m2:
        raise ImageTooSmall(
            f"RGB image {rgb.shape[:2]} cannot supply a {geo.image_shape} crop at {spec.crop_origin}"
        )
    crop = rgb[o1 : o1 + m1, o2 : o2 + m2]
    truth = crop[..., 0].copy()
    kernel = spec.kernel()

    clean = forward_replicated(clip_boundary(truth, geo), kernel, spec.sampling)
    noisy = add_gaussian_noise(clean, spec.noise_variance, spec.random_seed)
    lo, hi = float(noisy.min()), float(noisy.max())
    scale = hi - lo if hi > lo else 1.0
    f = (noisy - lo) / scale

    v = shift_image(grayscale(crop), spec.side_info_shift)
    return SynthProblem(f, v, (truth - lo) / scale, kernel, spec, lo, scale)


def desk_problem(kind: str = "disk", seed: int = 0, rgb=None, **overrides) -> SynthProblem:
    """Small instances with data 25x25, s=4 and noise variance 0.001.

    ``disk``: centered disk kernel 11x11 (image 110x110) and side
    information shifted by (5, 5).  ``gaussian``: kernel 15x15 (image
    114x114) offset by (5, 5) taps, aligned side information.  Keyword
    overrides are passed on to :class:`SynthSpec`.
    """
    settings = dict(
        kernel_shape=(11, 11),
        sampling=4,
        data_shape=(25, 25),
        noise_variance=0.001,
        random_seed=seed,
    )
    if kind == "disk":
        settings.update(kernel_kind="disk", side_info_shift=(5, 5))
    elif kind == "gaussian":
        settings.update(kernel_kind="gaussian", kernel_shape=(15, 15), kernel_offset=(5.0, 5.0))
    else:
        raise BadParams(f"desk instances are 'disk' or 'gaussian', got {kind!r}")
    settings.update(overrides)
    spec = SynthSpec(**settings)
    if rgb is None:
        rgb = make_scene(spec.geometry.image_shape, seed=seed)
    return make_problem(rgb, spec)
