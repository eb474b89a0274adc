"""Objective, data-fit gradients and step sizes."""

import numpy as np

from ..core import as_image
from ..errors import BadParams, EvenKernel
from ..forward import ForwardPlan, adjoint_a_image, adjoint_a_kernel, apply_a
from ..regularizers import dtv, project_simplex, tv

__all__ = [
    "data_fidelity",
    "grad_u",
    "grad_k",
    "objective",
    "objective_terms",
    "is_feasible",
    "step_size",
    "gaussian_init_kernel",
]

SIMPLEX_SUM_TOL = 1e-9


def data_fidelity(u, k, f, plan: ForwardPlan) -> float:
    """``0.5 * |A_k u - f|^2``."""
    r = apply_a(u, k, plan) - plan.check_data(f)
    return 0.5 * float(np.sum(r * r))


def grad_u(u, k, f, plan: ForwardPlan) -> np.ndarray:
    """``A_k^* (A_k u - f)``."""
    return adjoint_a_image(apply_a(u, k, plan) - plan.check_data(f), k, plan)


def grad_k(u, k, f, plan: ForwardPlan) -> np.ndarray:
    """``J^* A_u^* (A_u J k - f)``."""
    return adjoint_a_kernel(apply_a(u, k, plan) - plan.check_data(f), u, plan)


def is_feasible(u, k) -> bool:
    u = np.asarray(u)
    k = np.asarray(k)
    return bool(
        np.all(u >= 0) and np.all(k >= 0) and abs(float(k.sum()) - 1.0) <= SIMPLEX_SUM_TOL
    )


def objective_terms(u, k, f, params, xi, plan: ForwardPlan):
    """Return ``(D, lambda_u dTV(u), lambda_k TV(k))`` ignoring the constraints."""
    return (
        data_fidelity(u, k, f, plan),
        params.lambda_u * dtv(u, xi),
        params.lambda_k * tv(k),
    )


def objective(u, k, f, params, xi, plan: ForwardPlan) -> float:
    """Full objective; ``inf`` when ``u`` is negative somewhere or ``k`` leaves the simplex."""
    if not is_feasible(u, k):
        return float("inf")
    return float(sum(objective_terms(u, k, f, params, xi, plan)))


def step_size(alpha: float, theta: float, lipschitz: float) -> float:
    """``(1 - alpha) / (1 + 2 alpha) * 2 / (theta L)``."""
    if not 0.0 <= alpha < 1.0 or not theta > 1.0 or not lipschitz > 0.0:
        raise BadParams(f"invalid step parameters alpha={alpha}, theta={theta}, L={lipschitz}")
    return (1.0 - alpha) / (1.0 + 2.0 * alpha) * 2.0 / (theta * lipschitz)


def gaussian_init_kernel(shape, sigma: float) -> np.ndarray:
    """Centered isotropic Gaussian truncated to the window and normalized."""
    r1, r2 = (int(v) for v in shape)
    if r1 % 2 == 0 or r2 % 2 == 0:
        raise EvenKernel(f"kernel sides must be odd, got {(r1, r2)}")
    if not sigma > 0:
        raise BadParams(f"sigma must be positive, got {sigma}")
    i = np.arange(r1) - (r1 - 1) / 2
    j = np.arange(r2) - (r2 - 1) / 2
    k = np.exp(-(i[:, None] ** 2 + j[None, :] ** 2) / (2.0 * sigma**2))
    return project_simplex(k / k.sum())
