"""PALM and inertial PALM with backtracking on the local Lipschitz estimates.

Each outer iteration updates the image and then the kernel at the fresh
image.  A block update is accepted once

* the descent inequality
  ``D(x+) <= D(x_a) + <g, x+ - x_a> + L/2 |x+ - x_a|^2`` holds, and
* the proximal descent inequality
  ``R(x+) <= R(x) + <g, x - x+> + (|x - x_a|^2 - |x+ - x_a|^2) / (2 tau)``
  holds for the inexactly evaluated prox.

A failing descent test raises ``L`` by ``eta``.  A failing prox test
doubles the inner prox budget (warm started) up to ``prox_budget_cap``
times the base; if it still fails the block keeps its current value, which
satisfies the prox test trivially.  Without inertia the block objective is
additionally required not to increase, which makes the objective trace
monotone even though the prox is only approximate.
"""

import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from ..forward import _sample_clip, _sample_clip_adjoint, restrict_kernel
from ..regularizers import ProxConfig, dtv, prox_dtv_nonneg, prox_tv_simplex, tv
from .base import FusionProblem, SolverParams, SolverResult, SolverTrace, StepRecord
from .objective import step_size
from ..errors import BacktrackStall, BadParams

__all__ = [
    "BacktrackResult",
    "backtrack_step",
    "descent_holds",
    "prox_descent_holds",
    "run_palm",
    "run_ipalm",
]

# relative slack absorbing floating-point rounding in the two inequalities
ROUNDING_SLACK = 1e-12


def _slack(*values):
    return ROUNDING_SLACK * max(1.0, *(abs(v) for v in values))


def descent_holds(d_plus, d_alpha, grad, x_plus, x_alpha, lipschitz) -> bool:
    diff = x_plus - x_alpha
    bound = d_alpha + float(np.sum(grad * diff)) + 0.5 * lipschitz * float(np.sum(diff * diff))
    return d_plus <= bound + _slack(d_alpha)


def prox_descent_holds(r_plus, r_x, grad, x, x_plus, x_alpha, tau) -> bool:
    a = x - x_alpha
    b = x_plus - x_alpha
    bound = (
        r_x
        + float(np.sum(grad * (x - x_plus)))
        + (float(np.sum(a * a)) - float(np.sum(b * b))) / (2.0 * tau)
    )
    return r_plus <= bound + _slack(r_x)


@dataclass
class BacktrackResult:
    x_plus: np.ndarray
    lipschitz: float
    lipschitz_used: float
    tau: float
    d_plus: float
    r_plus: float
    retries: int
    fallback: bool


def backtrack_step(
    x_alpha,
    grad,
    lipschitz,
    prox: Callable,
    params: SolverParams,
    *,
    x,
    smooth: Callable,
    reg: Callable,
    d_alpha: Optional[float] = None,
    r_x: Optional[float] = None,
    alpha: Optional[float] = None,
) -> BacktrackResult:
    """One backtracked forward-backward step for a single block.

    ``prox(z, tau, factor)`` evaluates the (approximate) prox of
    ``tau * R`` at ``z`` with ``factor`` times the base inner budget,
    ``smooth`` evaluates the data term with the other block held fixed and
    ``reg`` the weighted regularizer.  ``x`` is the current iterate, used in
    the proximal descent test and as the fallback.
    """
    alpha = params.alpha if alpha is None else alpha
    if not params.l_min <= lipschitz <= params.l_max:
        raise BadParams(f"Lipschitz estimate {lipschitz} outside [l_min, l_max]")
    if d_alpha is None:
        d_alpha = smooth(x_alpha)
    if r_x is None:
        r_x = reg(x)
    monotone = alpha == 0.0
    L = float(lipschitz)
    retries = 0
    raises = 0
    while True:
        tau = step_size(alpha, params.theta, L)
        z = x_alpha - tau * grad
        factor = 1
        while True:
            x_plus = prox(z, tau, factor)
            d_plus = smooth(x_plus)
            descent = descent_holds(d_plus, d_alpha, grad, x_plus, x_alpha, L)
            if not descent:
                break
            r_plus = reg(x_plus)
            ok = prox_descent_holds(r_plus, r_x, grad, x, x_plus, x_alpha, tau)
            if ok and monotone:
                ok = d_plus + r_plus <= d_alpha + r_x + _slack(d_alpha + r_x)
            if ok or factor >= params.prox_budget_cap:
                break
            factor *= 2
            retries += 1
        if descent and not ok:
            x_plus, r_plus = x, r_x
            d_plus = d_alpha if monotone else smooth(x)
            descent = descent_holds(d_plus, d_alpha, grad, x_plus, x_alpha, L)
        if not descent:
            raises += 1
            retries += 1
            if raises > params.backtrack_limit or L >= params.l_max:
                raise BacktrackStall(
                    f"descent inequality fails after {raises} increases (L={L:.3e})"
                )
            L = min(params.eta * L, params.l_max)
            continue
        L_used = L
        if ok:
            L = max(L / params.eta, params.l_min)
        return BacktrackResult(x_plus, L, L_used, tau, d_plus, r_plus, retries, not ok)


class _Workspace:
    """Spectra and closures for the two block updates of one problem."""

    def __init__(self, problem: FusionProblem):
        self.problem = problem
        self.plan = problem.plan
        self.geometry = problem.plan.geometry
        self.f = problem.f

    def residual(self, u_hat, k_hat):
        return _sample_clip(self.plan.ifft(u_hat * k_hat), self.geometry) - self.f

    def fidelity(self, u_hat, k_hat):
        r = self.residual(u_hat, k_hat)
        return 0.5 * float(np.sum(r * r)), r

    def back(self, r):
        return self.plan.fft(_sample_clip_adjoint(r, self.geometry))


def _run(problem: FusionProblem, params: SolverParams, alpha: float, init,
         step_callback, algorithm: str) -> SolverResult:
    ws = _Workspace(problem)
    plan = ws.plan
    xi = problem.xi.xi
    lam_u, lam_k = params.lambda_u, params.lambda_k

    if init is None:
        init = problem.initial_guess()
    u = plan.check_image(init[0], "initial image").copy()
    k = plan.check_kernel(init[1], "initial kernel").copy()
    u_prev, k_prev = u.copy(), k.copy()
    Lu, Lk = float(params.initial_lu), float(params.initial_lk)
    cfg_u = ProxConfig(params.prox_iterations)
    cfg_k = ProxConfig(params.prox_iterations)

    reg_u = lambda x: lam_u * dtv(x, xi)
    reg_k = lambda x: lam_k * tv(x)

    trace = SolverTrace(algorithm)
    k_hat = plan.kernel_spectrum(k)
    d0, _ = ws.fidelity(plan.fft(u), k_hat)
    ru, rk = reg_u(u), reg_k(k)
    trace.append(0, d0 + ru + rk, d0, ru, rk, Lu, Lk, 0, 0.0)
    start = time.perf_counter()

    for it in range(1, params.max_iterations + 1):
        # image block
        u_alpha = u + alpha * (u - u_prev)
        d_alpha, r = ws.fidelity(plan.fft(u_alpha), k_hat)
        g_u = plan.ifft(np.conj(k_hat) * ws.back(r))

        def prox_u(z, tau, factor):
            nonlocal cfg_u
            cfg = replace(cfg_u, max_inner_iterations=params.prox_iterations * factor)
            x, cfg_u = prox_dtv_nonneg(z, tau, lam_u, xi, cfg)
            return x

        res_u = backtrack_step(
            u_alpha, g_u, Lu, prox_u, params, x=u,
            smooth=lambda x: ws.fidelity(plan.fft(x), k_hat)[0],
            reg=reg_u, d_alpha=d_alpha, r_x=ru, alpha=alpha,
        )
        if step_callback is not None:
            step_callback(StepRecord(it, "u", u, u_alpha, res_u.x_plus, g_u, res_u.tau,
                                     res_u.lipschitz_used, k, res_u.fallback))
        u_prev, u = u, res_u.x_plus
        Lu, ru = res_u.lipschitz, res_u.r_plus

        # kernel block at the new image
        u_hat = plan.fft(u)
        k_alpha = k + alpha * (k - k_prev)
        d_alpha, r = ws.fidelity(u_hat, plan.kernel_spectrum(k_alpha))
        g_k = restrict_kernel(plan.ifft(np.conj(u_hat) * ws.back(r)), ws.geometry)
        if alpha == 0.0:
            rk_now = rk
        else:
            rk_now = reg_k(k)

        def prox_k(z, tau, factor):
            nonlocal cfg_k
            cfg = replace(cfg_k, max_inner_iterations=params.prox_iterations * factor)
            x, cfg_k = prox_tv_simplex(z, tau, lam_k, cfg)
            return x

        res_k = backtrack_step(
            k_alpha, g_k, Lk, prox_k, params, x=k,
            smooth=lambda x: ws.fidelity(u_hat, plan.kernel_spectrum(x))[0],
            reg=reg_k, d_alpha=d_alpha, r_x=rk_now, alpha=alpha,
        )
        if step_callback is not None:
            step_callback(StepRecord(it, "k", k, k_alpha, res_k.x_plus, g_k, res_k.tau,
                                     res_k.lipschitz_used, u, res_k.fallback))
        k_prev, k = k, res_k.x_plus
        Lk, rk = res_k.lipschitz, res_k.r_plus
        k_hat = plan.kernel_spectrum(k)

        d = res_k.d_plus
        trace.append(it, d + ru + rk, d, ru, rk, Lu, Lk, res_u.retries + res_k.retries,
                     time.perf_counter() - start)

    return SolverResult(u, k, trace)


def run_palm(problem: FusionProblem, params: SolverParams = SolverParams(), init=None,
             step_callback=None) -> SolverResult:
    """PALM: alternating backtracked proximal-gradient steps, no inertia.

    ``init`` is an ``(image, kernel)`` pair; by default the upsampled data
    and a centered Gaussian kernel.  ``step_callback`` receives a
    :class:`StepRecord` after every accepted block update.
    """
    return _run(problem, params, 0.0, init, step_callback, "palm")


def run_ipalm(problem: FusionProblem, params: SolverParams = SolverParams(), init=None,
              step_callback=None) -> SolverResult:
    """Inertial PALM with a single inertia ``params.alpha`` for both blocks.

    The objective is not guaranteed to decrease.  With ``alpha == 0`` the
    iterates coincide with :func:`run_palm` bit for bit.
    """
    return _run(problem, params, float(params.alpha), init, step_callback, "ipalm")
