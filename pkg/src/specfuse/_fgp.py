"""Compiled inner loop of the dual fast gradient projection.

One pass of the loop touches every pixel a handful of times; fusing the
gradient, the directional projection, the divergence and the constraint
projection into explicit loops is several times faster than composing
numpy array operations on the small images used here.
"""

import numpy as np
from numba import njit

NONNEG = 0
SIMPLEX = 1


@njit(cache=True)
def _project(v, constraint):
    if constraint == NONNEG:
        n1, n2 = v.shape
        for i in range(n1):
            for j in range(n2):
                if v[i, j] < 0.0:
                    v[i, j] = 0.0
        return
    flat = v.ravel()
    desc = np.sort(flat)[::-1]
    css = 0.0
    theta = 0.0
    for idx in range(desc.size):
        css += desc[idx]
        t = (css - 1.0) / (idx + 1)
        if desc[idx] - t > 0.0:
            theta = t
    total = 0.0
    for idx in range(flat.size):
        flat[idx] = max(flat[idx] - theta, 0.0)
        total += flat[idx]
    for idx in range(flat.size):
        flat[idx] /= total


@njit(cache=True)
def _primal(y, weight, q0, q1, xi0, xi1, directional, constraint, x, a0, a1):
    """``x = proj(y + weight * div(P q))``; ``a0, a1`` are scratch."""
    n1, n2 = y.shape
    for i in range(n1):
        for j in range(n2):
            g0 = q0[i, j]
            g1 = q1[i, j]
            if directional:
                inner = xi0[i, j] * g0 + xi1[i, j] * g1
                g0 -= inner * xi0[i, j]
                g1 -= inner * xi1[i, j]
            a0[i, j] = g0
            a1[i, j] = g1
    for i in range(n1):
        im = i - 1 if i > 0 else n1 - 1
        for j in range(n2):
            jm = j - 1 if j > 0 else n2 - 1
            d = a0[i, j] - a0[im, j] + a1[i, j] - a1[i, jm]
            x[i, j] = y[i, j] + weight * d
    _project(x, constraint)


@njit(cache=True)
def _gap(x, p0, p1, xi0, xi1, directional, weight):
    n1, n2 = x.shape
    total = 0.0
    for i in range(n1):
        ip = i + 1 if i < n1 - 1 else 0
        for j in range(n2):
            jp = j + 1 if j < n2 - 1 else 0
            g0 = x[ip, j] - x[i, j]
            g1 = x[i, jp] - x[i, j]
            if directional:
                inner = xi0[i, j] * g0 + xi1[i, j] * g1
                g0 -= inner * xi0[i, j]
                g1 -= inner * xi1[i, j]
            total += np.sqrt(g0 * g0 + g1 * g1) - (g0 * p0[i, j] + g1 * p1[i, j])
    return weight * total


@njit(cache=True)
def fgp_loop(y, weight, xi0, xi1, directional, constraint, p0, p1, max_iter, tol):
    """Run the dual iteration in place on ``(p0, p1)``.

    Returns ``(x, iterations, gap)`` where ``x`` is the primal point of the
    final dual iterate and ``gap`` is ``nan`` unless ``tol > 0``.
    """
    n1, n2 = y.shape
    step = 1.0 / (8.0 * weight)
    q0 = p0.copy()
    q1 = p1.copy()
    x = np.empty((n1, n2))
    a0 = np.empty((n1, n2))
    a1 = np.empty((n1, n2))
    t = 1.0
    it = 0
    gap = np.nan
    for it in range(1, max_iter + 1):
        _primal(y, weight, q0, q1, xi0, xi1, directional, constraint, x, a0, a1)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        for i in range(n1):
            ip = i + 1 if i < n1 - 1 else 0
            for j in range(n2):
                jp = j + 1 if j < n2 - 1 else 0
                # P grad x, written out (a helper call here is several times slower)
                g0 = x[ip, j] - x[i, j]
                g1 = x[i, jp] - x[i, j]
                if directional:
                    inner = xi0[i, j] * g0 + xi1[i, j] * g1
                    g0 -= inner * xi0[i, j]
                    g1 -= inner * xi1[i, j]
                z0 = q0[i, j] + step * g0
                z1 = q1[i, j] + step * g1
                nrm = np.sqrt(z0 * z0 + z1 * z1)
                if nrm > 1.0:
                    z0 /= nrm
                    z1 /= nrm
                # p_new is z; momentum uses the old p
                q0[i, j] = z0 + beta * (z0 - p0[i, j])
                q1[i, j] = z1 + beta * (z1 - p1[i, j])
                p0[i, j] = z0
                p1[i, j] = z1
        t = t_new
        if tol > 0.0:
            _primal(y, weight, p0, p1, xi0, xi1, directional, constraint, x, a0, a1)
            gap = _gap(x, p0, p1, xi0, xi1, directional, weight)
            if gap <= tol:
                return x, it, gap
    _primal(y, weight, p0, p1, xi0, xi1, directional, constraint, x, a0, a1)
    return x, it, gap
