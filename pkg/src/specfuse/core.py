"""Shape bookkeeping and the periodic finite-difference operators.

Images are plain 2-D ``float64`` numpy arrays indexed ``(row, col)``.
Gradient fields are arrays of shape ``(2, rows, cols)`` where component 0
differences along rows and component 1 along columns.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import BadFactor, EvenKernel, NonFiniteInput, ShapeMismatch

Shape2 = Tuple[int, int]

__all__ = [
    "Shape2",
    "ProblemGeometry",
    "geometry_from",
    "as_image",
    "gradient",
    "divergence",
]


def _shape2(shape, name="shape") -> Shape2:
    try:
        rows, cols = (int(v) for v in shape)
    except (TypeError, ValueError):
        raise ShapeMismatch(f"{name} must be a pair of integers, got {shape!r}")
    if rows < 1 or cols < 1:
        raise ShapeMismatch(f"{name} must be positive, got {(rows, cols)}")
    return rows, cols


def as_image(x, name="image", ndim=2) -> np.ndarray:
    """Convert to a finite float64 array, rejecting NaN/Inf."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != ndim:
        raise ShapeMismatch(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class ProblemGeometry:
    """Sizes of image ``m``, kernel ``r`` and data ``n`` with ``m - 2l = s n``."""

    image_shape: Shape2
    kernel_shape: Shape2
    sampling: int
    data_shape: Shape2

    def __post_init__(self):
        r = _shape2(self.kernel_shape, "kernel_shape")
        if r[0] % 2 == 0 or r[1] % 2 == 0:
            raise EvenKernel(f"kernel sides must be odd, got {r}")
        if int(self.sampling) < 1:
            raise BadFactor(f"sampling factor must be >= 1, got {self.sampling}")
        m = _shape2(self.image_shape, "image_shape")
        n = _shape2(self.data_shape, "data_shape")
        for mi, ri, ni in zip(m, r, n):
            if mi - (ri - 1) != self.sampling * ni:
                raise ShapeMismatch(
                    f"inconsistent geometry: m={m}, r={r}, s={self.sampling}, n={n}"
                )

    @property
    def margin(self) -> Shape2:
        return ((self.kernel_shape[0] - 1) // 2, (self.kernel_shape[1] - 1) // 2)

    @property
    def clipped_shape(self) -> Shape2:
        """Shape of the meaningful part, ``m - 2l``."""
        return (self.sampling * self.data_shape[0], self.sampling * self.data_shape[1])

    @classmethod
    def from_image_shape(cls, image_shape, kernel_shape, sampling) -> "ProblemGeometry":
        """Recover the data shape from ``(m, r, s)``."""
        m = _shape2(image_shape, "image_shape")
        r = _shape2(kernel_shape, "kernel_shape")
        s = int(sampling)
        if s < 1:
            raise BadFactor(f"sampling factor must be >= 1, got {sampling}")
        inner = (m[0] - (r[0] - 1), m[1] - (r[1] - 1))
        if inner[0] <= 0 or inner[1] <= 0 or inner[0] % s or inner[1] % s:
            raise ShapeMismatch(f"image {m} with kernel {r} is not a multiple of s={s}")
        return cls(m, r, s, (inner[0] // s, inner[1] // s))


def geometry_from(data_shape, kernel_shape, sampling) -> ProblemGeometry:
    """Build the geometry with ``m = s n + 2l`` from data and kernel sizes.

    >>> geometry_from((100, 100), (41, 41), 4).image_shape
    (440, 440)
    """
    n = _shape2(data_shape, "data_shape")
    r = _shape2(kernel_shape, "kernel_shape")
    if r[0] % 2 == 0 or r[1] % 2 == 0:
        raise EvenKernel(f"kernel sides must be odd, got {r}")
    s = int(sampling)
    if s < 1:
        raise BadFactor(f"sampling factor must be >= 1, got {sampling}")
    m = (s * n[0] + r[0] - 1, s * n[1] + r[1] - 1)
    return ProblemGeometry(m, r, s, n)


def gradient(u) -> np.ndarray:
    """Forward differences with periodic wrap, ``u[i + e_j] - u[i]``."""
    u = np.asarray(u, dtype=np.float64)
    g = np.empty((2,) + u.shape)
    g[0, :-1] = u[1:] - u[:-1]
    g[0, -1] = u[0] - u[-1]
    g[1, :, :-1] = u[:, 1:] - u[:, :-1]
    g[1, :, -1] = u[:, 0] - u[:, -1]
    return g


def divergence(g) -> np.ndarray:
    """Negative adjoint of :func:`gradient` (periodic backward differences)."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 3 or g.shape[0] != 2:
        raise ShapeMismatch(f"gradient field must have shape (2, rows, cols), got {g.shape}")
    p, q = g[0], g[1]
    d = np.empty(g.shape[1:])
    d[1:] = p[1:] - p[:-1]
    d[0] = p[0] - p[-1]
    d[:, 1:] += q[:, 1:] - q[:, :-1]
    d[:, 0] += q[:, 0] - q[:, -1]
    return d
