"""Proximal alternating minimization with ADMM inner solves.

Image step: ``argmin_x .5 |x - u|^2 + tau_u Psi(x, k)``.  ADMM splits
``z = C_k x`` (the blurred image, which carries the sampled data term and
is solved blockwise in closed form) and ``w = x`` (which carries
``lambda_u dTV + indicator(x >= 0)`` through its prox).  The ``x`` update
is diagonal in the Fourier domain.

Kernel step: ``argmin_x .5 |x - k|^2 + tau_k Psi(u, x)``.  The kernel is
small, so the data term is handled through the explicit matrix ``G`` with
``G k = A_u J k`` and a Cholesky factorization; ``w = x`` carries
``lambda_k TV + indicator(simplex)``.

The returned block iterate is the prox-side variable ``w`` (always
feasible) unless it does not improve the subproblem objective over the
current iterate, in which case the iterate is kept.  That safeguard makes
the objective trace monotone regardless of the inner budget.
"""

import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import cho_factor, cho_solve

from ..errors import InnerSolveDiverged
from ..forward import _sample_clip, sample, sample_adjoint
from ..regularizers import ProxConfig, dtv, prox_dtv_nonneg, prox_tv_simplex, tv
from .base import FusionProblem, SolverParams, SolverResult, SolverTrace

__all__ = [
    "ImageAdmmState",
    "KernelAdmmState",
    "kernel_design_matrix",
    "solve_image_subproblem",
    "solve_kernel_subproblem",
    "run_pam",
]

DIVERGENCE_FACTOR = 1e3


@dataclass
class ImageAdmmState:
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    d: np.ndarray
    e: np.ndarray
    prox: ProxConfig


@dataclass
class KernelAdmmState:
    x: np.ndarray
    w: np.ndarray
    e: np.ndarray
    prox: ProxConfig


def kernel_design_matrix(u, geometry) -> np.ndarray:
    """Matrix ``G`` of shape ``(n1 n2, r1 r2)`` with ``G vec(k) = vec(A_u J k)``.

    Kernel tap ``(i, j)`` shifts the image by ``(i - l1, j - l2)``; after
    margin clipping this reads the window starting at ``(2 l1 - i, 2 l2 - j)``
    without any wrap-around, so every column is a strided read of the
    ``s x s`` box sums of ``u``.
    """
    u = np.asarray(u, dtype=np.float64)
    s = geometry.sampling
    (r1, r2), (l1, l2), (n1, n2) = geometry.kernel_shape, geometry.margin, geometry.data_shape
    box = sliding_window_view(u, (s, s)).sum(axis=(2, 3))
    rows = (2 * l1 - np.arange(r1))[:, None] + s * np.arange(n1)[None, :]
    cols = (2 * l2 - np.arange(r2))[:, None] + s * np.arange(n2)[None, :]
    g = box[rows[:, None, :, None], cols[None, :, None, :]] / (s * s)
    return g.reshape(r1 * r2, n1 * n2).T


def _residual_norm(*parts):
    return float(np.sqrt(sum(np.sum(p * p) for p in parts)))


def solve_image_subproblem(u0, k, problem: FusionProblem, tau, params: SolverParams,
                           state: Optional[ImageAdmmState] = None):
    """Approximately minimize ``.5 |x - u0|^2 + tau Psi(x, k)`` over ``x``.

    Returns ``(w, state)``; ``w`` is nonnegative and ``state`` can be passed
    back in to warm start the next solve.
    """
    plan = problem.plan
    geo = plan.geometry
    s = geo.sampling
    rho = params.admm_rho
    lam = params.lambda_u
    xi = problem.xi.xi
    k_hat = plan.kernel_spectrum(k)
    u0_hat = plan.fft(u0)
    denom = 1.0 + rho + rho * np.abs(k_hat) ** 2
    if state is None:
        z0 = plan.ifft(k_hat * u0_hat)
        zeros = np.zeros_like(u0)
        state = ImageAdmmState(u0.copy(), z0, u0.copy(), zeros, zeros.copy(),
                               ProxConfig(params.admm_prox_iterations))

    # data-term block: (rho I + c 1 1^T) per s x s block, c = tau / s^4
    c = tau / s**4
    data_rhs = tau * sample_adjoint(problem.f, s)
    l1, l2 = geo.margin
    m1, m2 = geo.clipped_shape

    x, z, w, d, e, cfg = state.x, state.z, state.w, state.d, state.e, state.prox
    first = None
    for _ in range(params.admm_iterations):
        x_hat = (u0_hat + rho * np.conj(k_hat) * plan.fft(z - d) + rho * plan.fft(w - e)) / denom
        x = plan.ifft(x_hat)
        cx = plan.ifft(k_hat * x_hat)

        v = cx + d
        z = v.copy()
        rhs = data_rhs + rho * v[l1 : l1 + m1, l2 : l2 + m2]
        block = sample_adjoint(sample(rhs, s), s) * (s * s * s * s)
        z[l1 : l1 + m1, l2 : l2 + m2] = (rhs - c * block / (rho + c * s * s)) / rho

        cfg = replace(cfg, max_inner_iterations=params.admm_prox_iterations)
        w, cfg = prox_dtv_nonneg(x + e, tau / rho, lam, xi, cfg)

        r_z, r_w = cx - z, x - w
        d = d + r_z
        e = e + r_w
        res = _residual_norm(r_z, r_w)
        if first is None:
            first = res
        elif res > DIVERGENCE_FACTOR * max(first, 1e-6 * (1.0 + np.linalg.norm(x))):
            raise InnerSolveDiverged(f"image ADMM residual grew from {first:.3e} to {res:.3e}")
    return w, ImageAdmmState(x, z, w, d, e, cfg)


def solve_kernel_subproblem(k0, u, problem: FusionProblem, tau, params: SolverParams,
                            state: Optional[KernelAdmmState] = None):
    """Approximately minimize ``.5 |x - k0|^2 + tau Psi(u, x)`` over ``x``.

    Returns ``(w, state)`` with ``w`` in the unit simplex.
    """
    geo = problem.plan.geometry
    rho = params.admm_rho
    lam = params.lambda_k
    g = kernel_design_matrix(u, geo)
    q = g.shape[1]
    system = tau * (g.T @ g)
    system[np.diag_indices(q)] += 1.0 + rho
    factor = cho_factor(system)
    base = k0.ravel() + tau * (g.T @ problem.f.ravel())
    if state is None:
        state = KernelAdmmState(k0.copy(), k0.copy(), np.zeros_like(k0),
                                ProxConfig(params.prox_iterations))

    x, w, e, cfg = state.x, state.w, state.e, state.prox
    first = None
    for _ in range(params.admm_kernel_iterations):
        x = cho_solve(factor, base + rho * (w - e).ravel()).reshape(k0.shape)
        cfg = replace(cfg, max_inner_iterations=params.prox_iterations)
        w, cfg = prox_tv_simplex(x + e, tau / rho, lam, cfg)
        r_w = x - w
        e = e + r_w
        res = _residual_norm(r_w)
        if first is None:
            first = res
        elif res > DIVERGENCE_FACTOR * max(first, 1e-6 * (1.0 + np.linalg.norm(x))):
            raise InnerSolveDiverged(f"kernel ADMM residual grew from {first:.3e} to {res:.3e}")
    return w, KernelAdmmState(x, w, e, cfg)


def _fidelity(u, k, problem):
    plan = problem.plan
    r = _sample_clip(plan.ifft(plan.fft(u) * plan.kernel_spectrum(k)), plan.geometry) - problem.f
    return 0.5 * float(np.sum(r * r))


def run_pam(problem: FusionProblem, params: SolverParams = SolverParams(),
            init=None) -> SolverResult:
    """PAM with step sizes ``params.tau_u`` and ``params.tau_k``.

    The trace reports ``nan`` for the Lipschitz columns; ``retries`` counts
    the block updates rejected by the monotonicity safeguard.
    """
    plan = problem.plan
    xi = problem.xi.xi
    lam_u, lam_k = params.lambda_u, params.lambda_k
    tau_u, tau_k = params.tau_u, params.tau_k

    if init is None:
        init = problem.initial_guess()
    u = plan.check_image(init[0], "initial image").copy()
    k = plan.check_kernel(init[1], "initial kernel").copy()

    d = _fidelity(u, k, problem)
    ru, rk = lam_u * dtv(u, xi), lam_k * tv(k)
    trace = SolverTrace("pam")
    trace.append(0, d + ru + rk, d, ru, rk, np.nan, np.nan, 0, 0.0)
    state_u = state_k = None
    start = time.perf_counter()

    for it in range(1, params.max_iterations + 1):
        rejected = 0

        cand, state_u = solve_image_subproblem(u, k, problem, tau_u, params, state_u)
        d_c, ru_c = _fidelity(cand, k, problem), lam_u * dtv(cand, xi)
        phi_c = 0.5 * float(np.sum((cand - u) ** 2)) + tau_u * (d_c + ru_c + rk)
        if phi_c <= tau_u * (d + ru + rk):
            u, d, ru = cand, d_c, ru_c
        else:
            rejected += 1

        cand, state_k = solve_kernel_subproblem(k, u, problem, tau_k, params, state_k)
        d_c, rk_c = _fidelity(u, cand, problem), lam_k * tv(cand)
        phi_c = 0.5 * float(np.sum((cand - k) ** 2)) + tau_k * (d_c + ru + rk_c)
        if phi_c <= tau_k * (d + ru + rk):
            k, d, rk = cand, d_c, rk_c
        else:
            rejected += 1

        trace.append(it, d + ru + rk, d, ru, rk, np.nan, np.nan, rejected,
                     time.perf_counter() - start)
    return SolverResult(u, k, trace)
