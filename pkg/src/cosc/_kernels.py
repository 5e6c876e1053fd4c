"""Compiled inner loop of the dual solver."""

import numpy as np
from numba import njit


@njit(cache=True)
def simplex_project_nb(x, out):
    n = x.size
    u = np.sort(x)
    css = 0.0
    theta = 0.0
    # Walk from the largest entry down; keep the last index satisfying the rule.
    for k in range(n):
        css += u[n - 1 - k]
        t = (css - 1.0) / (k + 1.0)
        if u[n - 1 - k] - t > 0:
            theta = t
    for i in range(n):
        out[i] = max(x[i] - theta, 0.0)


@njit(cache=True)
def _residual(heads, tails, beta, v, bvec, invM, degenerate, Bb, d, pd, r):
    n = r.size
    for i in range(n):
        Bb[i] = 0.0
    for e in range(heads.size):
        Bb[heads[e]] += beta[e]
        Bb[tails[e]] -= beta[e]
    if degenerate:
        for i in range(n):
            r[i] = Bb[i] - bvec[i]
    else:
        for i in range(n):
            d[i] = -Bb[i] * invM + v[i] + bvec[i]
        simplex_project_nb(d, pd)
        for i in range(n):
            r[i] = d[i] - pd[i]
    acc = 0.0
    for i in range(n):
        acc += r[i] * r[i]
    return 0.5 * acc


@njit(cache=True)
def fista(heads, tails, bounds, bvec, M, degenerate, beta, v, L, tol, max_iter, check_every, zero):
    """Accelerated projected gradient; updates ``beta`` and ``v`` in place.

    ``bvec`` is ``t / c`` (simplex form) or ``t`` (degenerate form).
    Returns the iteration count.
    """
    n = bvec.size
    m = heads.size
    invM = 1.0 / M
    step = 1.0 / L
    Bb = np.empty(n)
    d = np.empty(n)
    pd = np.empty(n)
    r = np.empty(n)
    yb = beta.copy()
    yv = v.copy()
    nb = np.empty(m)
    nv = np.empty(n)
    tmp = np.empty(n)
    t = 1.0
    prev = -1.0
    k = 0
    for k in range(1, max_iter + 1):
        _residual(heads, tails, yb, yv, bvec, invM, degenerate, Bb, d, pd, r)
        if degenerate:
            for e in range(m):
                g = r[heads[e]] - r[tails[e]]
                x = yb[e] - step * g
                nb[e] = min(max(x, -bounds[e]), bounds[e])
        else:
            for e in range(m):
                g = -(r[heads[e]] - r[tails[e]]) * invM
                x = yb[e] - step * g
                nb[e] = min(max(x, -bounds[e]), bounds[e])
            for i in range(n):
                tmp[i] = yv[i] - step * r[i]
            simplex_project_nb(tmp, nv)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_next
        for e in range(m):
            yb[e] = nb[e] + mom * (nb[e] - beta[e])
            beta[e] = nb[e]
        if not degenerate:
            for i in range(n):
                yv[i] = nv[i] + mom * (nv[i] - v[i])
                v[i] = nv[i]
        t = t_next
        if k % check_every == 0:
            val = _residual(heads, tails, beta, v, bvec, invM, degenerate, Bb, d, pd, r)
            if val < zero:
                break
            if prev >= 0.0 and abs(prev - val) <= tol * max(val, 1e-300):
                break
            prev = val
    return k
