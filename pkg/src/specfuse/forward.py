"""Sampled blur ``A_k = S B C_k`` and its adjoints.

``C_k`` is a cyclic convolution with the kernel embedded so that its center
tap sits at the lattice origin, ``B`` deletes a margin of width
``l = (r - 1) / 2`` and ``S`` averages ``s x s`` blocks.  Because the
convolution is symmetric, ``A_k u = A_u J k``; both code paths below share
the same spectra so the identity holds to rounding.
"""

import numpy as np

from .core import ProblemGeometry, as_image
from .errors import NotDivisible, ShapeMismatch

__all__ = [
    "ForwardPlan",
    "embed_kernel",
    "restrict_kernel",
    "convolve",
    "clip_boundary",
    "clip_boundary_adjoint",
    "sample",
    "sample_adjoint",
    "apply_a",
    "apply_a_on_kernel",
    "adjoint_a_image",
    "adjoint_a_kernel",
    "upsample_init",
]


class ForwardPlan:
    """Frequency-domain bookkeeping for one geometry.

    The plan is immutable and can be shared between threads.  Spectra of
    images are recomputed by the caller whenever the image changes; the
    helpers :meth:`fft` and :meth:`ifft` keep the real-FFT layout in one
    place.
    """

    def __init__(self, geometry: ProblemGeometry):
        self.geometry = geometry
        self.image_shape = tuple(geometry.image_shape)

    def __repr__(self):
        g = self.geometry
        return (
            f"ForwardPlan(m={g.image_shape}, r={g.kernel_shape}, "
            f"s={g.sampling}, n={g.data_shape})"
        )

    def fft(self, x):
        return np.fft.rfft2(x)

    def ifft(self, x_hat):
        return np.fft.irfft2(x_hat, s=self.image_shape)

    def kernel_spectrum(self, k):
        return np.fft.rfft2(embed_kernel(k, self.geometry))

    def check_image(self, u, name="image"):
        u = as_image(u, name)
        if u.shape != self.image_shape:
            raise ShapeMismatch(f"{name} has shape {u.shape}, expected {self.image_shape}")
        return u

    def check_kernel(self, k, name="kernel"):
        k = as_image(k, name)
        if k.shape != tuple(self.geometry.kernel_shape):
            raise ShapeMismatch(
                f"{name} has shape {k.shape}, expected {self.geometry.kernel_shape}"
            )
        return k

    def check_data(self, y, name="data"):
        y = as_image(y, name)
        if y.shape != tuple(self.geometry.data_shape):
            raise ShapeMismatch(
                f"{name} has shape {y.shape}, expected {self.geometry.data_shape}"
            )
        return y


def embed_kernel(k, geometry: ProblemGeometry) -> np.ndarray:
    """Zero-pad ``k`` to image size with its center tap at index ``(0, 0)``."""
    k = as_image(k, "kernel")
    if k.shape != tuple(geometry.kernel_shape):
        raise ShapeMismatch(f"kernel has shape {k.shape}, expected {geometry.kernel_shape}")
    m = geometry.image_shape
    if k.shape[0] > m[0] or k.shape[1] > m[1]:
        raise ShapeMismatch(f"kernel {k.shape} does not fit into image {m}")
    l1, l2 = geometry.margin
    out = np.zeros(m)
    out[: k.shape[0], : k.shape[1]] = k
    return np.roll(out, (-l1, -l2), axis=(0, 1))


def restrict_kernel(x, geometry: ProblemGeometry) -> np.ndarray:
    """Adjoint of :func:`embed_kernel`: read the kernel window back out."""
    l1, l2 = geometry.margin
    r1, r2 = geometry.kernel_shape
    rolled = np.roll(x, (l1, l2), axis=(0, 1))
    return rolled[:r1, :r2].copy()


def convolve(u, k, plan: ForwardPlan) -> np.ndarray:
    """Cyclic convolution ``C_k u = F^-1(F(J k) . F(u))``."""
    u = plan.check_image(u)
    k = plan.check_kernel(k)
    return plan.ifft(plan.kernel_spectrum(k) * plan.fft(u))


def clip_boundary(u, geometry: ProblemGeometry) -> np.ndarray:
    """Delete the margin: ``(B u)_i = u_{i + l}``."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != tuple(geometry.image_shape):
        raise ShapeMismatch(f"image has shape {u.shape}, expected {geometry.image_shape}")
    l1, l2 = geometry.margin
    return u[l1 : u.shape[0] - l1, l2 : u.shape[1] - l2].copy()


def clip_boundary_adjoint(y, geometry: ProblemGeometry) -> np.ndarray:
    """Zero-pad a meaningful-part image back to the full lattice."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != tuple(geometry.clipped_shape):
        raise ShapeMismatch(f"image has shape {y.shape}, expected {geometry.clipped_shape}")
    l1, l2 = geometry.margin
    out = np.zeros(geometry.image_shape)
    out[l1 : l1 + y.shape[0], l2 : l2 + y.shape[1]] = y
    return out


def sample(u, s: int) -> np.ndarray:
    """Average over non-overlapping ``s x s`` blocks."""
    u = np.asarray(u, dtype=np.float64)
    s = int(s)
    if s < 1 or u.shape[0] % s or u.shape[1] % s:
        raise NotDivisible(f"image shape {u.shape} is not divisible by s={s}")
    if s == 1:
        return u.copy()
    n1, n2 = u.shape[0] // s, u.shape[1] // s
    return u.reshape(n1, s, n2, s).sum(axis=(1, 3)) / (s * s)


def sample_adjoint(y, s: int) -> np.ndarray:
    """Spread each data value over its block with weight ``1 / s^2``."""
    y = np.asarray(y, dtype=np.float64)
    s = int(s)
    if s == 1:
        return y.copy()
    return np.repeat(np.repeat(y, s, axis=0), s, axis=1) / (s * s)


def _sample_clip(x, geometry):
    return sample(clip_boundary(x, geometry), geometry.sampling)


def _sample_clip_adjoint(y, geometry):
    return clip_boundary_adjoint(sample_adjoint(y, geometry.sampling), geometry)


def apply_a(u, k, plan: ForwardPlan) -> np.ndarray:
    """Forward model ``A_k u`` mapping an image to data."""
    return _sample_clip(convolve(u, k, plan), plan.geometry)


def apply_a_on_kernel(k, u, plan: ForwardPlan) -> np.ndarray:
    """Evaluate ``A_u J k``, the same data computed from the kernel side."""
    u = plan.check_image(u)
    k = plan.check_kernel(k)
    conv = plan.ifft(plan.fft(u) * plan.kernel_spectrum(k))
    return _sample_clip(conv, plan.geometry)


def adjoint_a_image(y, k, plan: ForwardPlan) -> np.ndarray:
    """``A_k^* y``: spread, pad, then correlate with the kernel."""
    y = plan.check_data(y)
    k = plan.check_kernel(k)
    back = _sample_clip_adjoint(y, plan.geometry)
    return plan.ifft(np.conj(plan.kernel_spectrum(k)) * plan.fft(back))


def adjoint_a_kernel(y, u, plan: ForwardPlan) -> np.ndarray:
    """``J^* A_u^* y``: correlate with the image and cut out the kernel window."""
    y = plan.check_data(y)
    u = plan.check_image(u)
    back = _sample_clip_adjoint(y, plan.geometry)
    full = plan.ifft(np.conj(plan.fft(u)) * plan.fft(back))
    return restrict_kernel(full, plan.geometry)


def upsample_init(f, geometry: ProblemGeometry) -> np.ndarray:
    """Right inverse of ``S B``: block replication plus edge-replicated margins."""
    f = as_image(f, "data")
    if f.shape != tuple(geometry.data_shape):
        raise ShapeMismatch(f"data has shape {f.shape}, expected {geometry.data_shape}")
    s = geometry.sampling
    inner = np.repeat(np.repeat(f, s, axis=0), s, axis=1)
    l1, l2 = geometry.margin
    return np.pad(inner, ((l1, l1), (l2, l2)), mode="edge")
