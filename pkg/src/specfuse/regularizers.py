"""Total variation, directional total variation and their proximal maps.

The directional TV of an image ``u`` with respect to a vector field ``xi``
is ``sum_i |P_i grad u_i|`` with ``P_i = I - xi_i xi_i^T``.  Proximal maps
of ``w * dTV + indicator(C)`` are computed in the dual with warm-started
fast gradient projection, the constraint set ``C`` being either the
nonnegative orthant (images) or the unit simplex (kernels).
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ._fgp import NONNEG, SIMPLEX, fgp_loop
from .core import as_image, gradient
from .errors import BadParams, BadStep, ShapeMismatch

__all__ = [
    "DtvParams",
    "VectorField",
    "ProxConfig",
    "build_vector_field",
    "grayscale",
    "tv",
    "dtv",
    "project_nonnegative",
    "project_simplex",
    "prox_dtv_nonneg",
    "prox_tv_simplex",
    "denoising_objective",
]

LUMA_WEIGHTS = (0.2989, 0.5870, 0.1140)

# ||grad||^2 <= 8 on the periodic lattice
GRAD_NORM_SQ = 8.0


@dataclass(frozen=True)
class DtvParams:
    gamma: float = 0.9995
    epsilon: float = 0.003

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise BadParams(f"gamma must lie in [0, 1], got {self.gamma}")
        if not self.epsilon > 0.0:
            raise BadParams(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class VectorField:
    """Per-pixel direction field of shape ``(2, rows, cols)`` with norms <= gamma."""

    xi: np.ndarray
    gamma: float

    @property
    def shape(self):
        return self.xi.shape[1:]

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros((2,) + tuple(shape)), 0.0)


@dataclass
class ProxConfig:
    """Inner-solver budget plus the dual variable carried between calls.

    ``dual`` has the shape of a gradient field and always lies in the
    pointwise unit ball.  A ``duality_tolerance`` of zero means the full
    iteration budget is used.
    """

    max_inner_iterations: int = 20
    duality_tolerance: float = 0.0
    dual: Optional[np.ndarray] = None
    last_iterations: int = 0
    last_gap: float = float("nan")


def build_vector_field(v, params: DtvParams = DtvParams()) -> VectorField:
    """``xi_i = gamma * grad v_i / sqrt(|grad v_i|^2 + eps^2)``."""
    v = as_image(v, "side information")
    g = gradient(v)
    norm_eps = np.sqrt(g[0] ** 2 + g[1] ** 2 + params.epsilon**2)
    return VectorField(params.gamma * g / norm_eps, float(params.gamma))


def grayscale(rgb) -> np.ndarray:
    """Luminance of an RGB image given as ``(rows, cols, 3)`` or ``(3, rows, cols)``."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim == 3 and rgb.shape[-1] == 3:
        r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    elif rgb.ndim == 3 and rgb.shape[0] == 3:
        r, g, b = rgb
    else:
        raise ShapeMismatch(f"expected a 3-channel image, got shape {rgb.shape}")
    wr, wg, wb = LUMA_WEIGHTS
    return np.clip(wr * r + wg * g + wb * b, 0.0, 1.0)


def _xi_array(xi, shape):
    if xi is None:
        return None
    arr = xi.xi if isinstance(xi, VectorField) else np.asarray(xi, dtype=np.float64)
    if arr.shape != (2,) + tuple(shape):
        raise ShapeMismatch(f"vector field has shape {arr.shape}, image is {tuple(shape)}")
    return arr


def _apply_p(g, xi):
    """``P_i g_i = g_i - <xi_i, g_i> xi_i`` at every pixel."""
    inner = xi[0] * g[0] + xi[1] * g[1]
    return g - inner * xi


def _pixel_norms(g):
    return np.sqrt(g[0] * g[0] + g[1] * g[1])


def tv(u) -> float:
    """Isotropic total variation with periodic forward differences."""
    return float(_pixel_norms(gradient(as_image(u))).sum())


def dtv(u, xi) -> float:
    """Directional total variation of ``u`` along the field ``xi``."""
    u = as_image(u)
    g = gradient(u)
    xi = _xi_array(xi, u.shape)
    return float(_pixel_norms(_apply_p(g, xi)).sum())


def project_nonnegative(u) -> np.ndarray:
    return np.maximum(np.asarray(u, dtype=np.float64), 0.0)


def project_simplex(k) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum x = 1}`` (sort and threshold)."""
    k = np.asarray(k, dtype=np.float64)
    flat = k.ravel()
    desc = np.sort(flat)[::-1]
    css = np.cumsum(desc) - 1.0
    idx = np.arange(1, flat.size + 1)
    rho = np.count_nonzero(desc - css / idx > 0)
    theta = css[rho - 1] / rho
    x = np.maximum(flat - theta, 0.0)
    # remove the last bit of rounding drift in the sum
    x /= x.sum()
    return x.reshape(k.shape)


def denoising_objective(x, y, weight, xi=None) -> float:
    """``0.5 |x - y|^2 + weight * dTV(x)`` without the constraint term."""
    reg = tv(x) if xi is None else dtv(x, xi)
    return 0.5 * float(np.sum((x - y) ** 2)) + weight * reg


def _fgp(y, weight, xi, constraint: int, cfg: ProxConfig):
    """Dual fast gradient projection for ``argmin_{x in C} .5|x-y|^2 + w |P grad x|_1``.

    For a dual field ``p`` in the unit ball the primal point is
    ``x(p) = proj_C(y + w div(P p))`` and the duality gap at that pair is
    ``w (sum |P grad x| - <P grad x, p>)``.
    """
    p = cfg.dual
    if p is None or p.shape != (2,) + y.shape:
        p = np.zeros((2,) + y.shape)
    p = p.copy()
    if xi is None:
        xi0 = xi1 = np.zeros((1, 1))
    else:
        xi0, xi1 = np.ascontiguousarray(xi[0]), np.ascontiguousarray(xi[1])
    x, it, gap = fgp_loop(
        np.ascontiguousarray(y), float(weight), xi0, xi1, xi is not None, constraint,
        p[0], p[1], int(cfg.max_inner_iterations), float(cfg.duality_tolerance),
    )
    return x, replace(cfg, dual=p, last_iterations=int(it), last_gap=float(gap))


def _prox(y, tau, lam, xi, project, constraint, cfg):
    if not tau > 0.0:
        raise BadStep(f"step size must be positive, got {tau}")
    if lam < 0.0:
        raise BadParams(f"regularization weight must be nonnegative, got {lam}")
    if cfg is None:
        cfg = ProxConfig()
    weight = tau * lam
    if weight == 0.0:
        return project(y), cfg
    x, cfg = _fgp(y, weight, xi, constraint, cfg)
    # never return something worse than the plain projection, which is x(p=0)
    x0 = project(y)
    if denoising_objective(x, y, weight, xi) > denoising_objective(x0, y, weight, xi):
        x = x0
    return x, cfg


def prox_dtv_nonneg(y, tau, lambda_u, xi, cfg: Optional[ProxConfig] = None):
    """Approximate prox of ``tau * (lambda_u dTV + indicator(x >= 0))`` at ``y``.

    Returns ``(x, cfg)`` where ``cfg`` carries the warm-start dual variable
    for the next call.
    """
    y = as_image(y)
    xi_arr = _xi_array(xi, y.shape)
    return _prox(y, float(tau), float(lambda_u), xi_arr, project_nonnegative, NONNEG, cfg)


def prox_tv_simplex(y, tau, lambda_k, cfg: Optional[ProxConfig] = None):
    """Approximate prox of ``tau * (lambda_k TV + indicator(simplex))`` at ``y``."""
    y = as_image(y, "kernel")
    return _prox(y, float(tau), float(lambda_k), None, project_simplex, SIMPLEX, cfg)
