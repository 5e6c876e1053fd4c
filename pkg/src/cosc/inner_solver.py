"""
Descent scheme for the constrained ratio and its inner convex problem.

Each outer step minimizes, over the Euclidean unit ball,

    R1(f) - <f, γ r2 + λ s>

with ``r2``, ``s`` subgradients at the current iterate.  The inner problem
is solved through a smooth dual over antisymmetric edge variables ``β``
(stored once per edge, ``|β_e| <= s_e``) and a simplex variable ``v``:

    Ψ(β, v) = ½ ||d - P_U(d)||²,    d = -(B/M) β + v + t / c,

where ``(Bβ)_i = Σ_{e=(i,j)} β_e - Σ_{e=(j,i)} β_e``, ``c = (γ/2) vol(Q^c)``
and ``M = sqrt(max degree)``.  The gradient of Ψ is Lipschitz with constant
at most ``1 + ||B||²/M² <= 3``, so the fixed step ``1/4`` is safe.  When
``c = 0`` the simplex block disappears and the dual is the box-constrained
least-squares problem ``½ ||Bβ - t||²`` with ``|β_e| <= w'_e``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._kernels import fista
from .functional import (
    f_gamma_cont,
    r1_half,
    subgradient_R2,
    subgradient_S,
)

__all__ = [
    "simplex_project",
    "InnerProblem",
    "DualState",
    "InnerResult",
    "InnerZero",
    "dual_objective",
    "dual_gradient",
    "primal_objective",
    "solve_inner",
    "DCAResult",
    "ratio_dca",
]

logger = logging.getLogger(__name__)

LIPSCHITZ = 4.0
ZERO_RESIDUAL = 1e-14


def simplex_project(x):
    """Euclidean projection onto ``{u >= 0, Σ u = 1}`` (sort and threshold)."""
    x = np.asarray(x, dtype=float)
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, x.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(x - theta, 0.0)


@dataclass
class InnerProblem:
    """Data of one inner problem.

    ``heads``/``tails``/``weights`` form the edge set ``E'`` (graph edges
    merged with must-link pairs, ``w' = w + γ q^m``); ``offset`` is
    ``t = γ r2 + λ s``.
    """

    n: int
    heads: np.ndarray
    tails: np.ndarray
    weights: np.ndarray
    c: float
    offset: np.ndarray
    M: float

    @classmethod
    def edges_for(cls, g, q, gamma):
        """Edge set ``E'`` with weights ``w + γ q^m``."""
        mi, mj, mq = q.must_arrays
        if gamma and mq.size:
            heads = np.concatenate([g.heads, mi])
            tails = np.concatenate([g.tails, mj])
            weights = np.concatenate([g.weights, gamma * mq])
            key = heads * g.n + tails
            uniq, inv = np.unique(key, return_inverse=True)
            w = np.bincount(inv, weights=weights, minlength=uniq.size)
            heads, tails, weights = uniq // g.n, uniq % g.n, w
        else:
            heads, tails, weights = g.heads, g.tails, g.weights
        return heads, tails, weights

    @classmethod
    def build(cls, g, q, gamma, r2, s, lam, edges=None):
        heads, tails, weights = edges if edges is not None else cls.edges_for(g, q, gamma)
        deg = np.bincount(heads, minlength=g.n) + np.bincount(tails, minlength=g.n)
        M = float(np.sqrt(max(deg.max(), 1)))
        c = 0.5 * gamma * q.vol_cannot
        offset = gamma * np.asarray(r2, dtype=float) + lam * np.asarray(s, dtype=float)
        return cls(g.n, heads, tails, weights, c, offset, M)

    @property
    def degenerate(self):
        return self.c <= 0

    @property
    def bounds(self):
        """Box bounds on ``β``: ``w' M / c``, or ``w'`` in the degenerate form."""
        if self.degenerate:
            return self.weights
        return self.weights * (self.M / self.c)

    @property
    def b_vec(self):
        return self.offset / self.c

    def apply_B(self, beta):
        return np.bincount(self.heads, weights=beta, minlength=self.n) - np.bincount(
            self.tails, weights=beta, minlength=self.n
        )

    def apply_Bt(self, d):
        return d[self.heads] - d[self.tails]

    def max_degree(self):
        deg = np.bincount(self.heads, minlength=self.n) + np.bincount(self.tails, minlength=self.n)
        return int(deg.max())


@dataclass
class DualState:
    beta: np.ndarray
    v: np.ndarray | None

    @classmethod
    def initial(cls, p):
        v = None if p.degenerate else np.full(p.n, 1.0 / p.n)
        return cls(np.zeros(p.heads.size), v)

    def copy(self):
        return DualState(self.beta.copy(), None if self.v is None else self.v.copy())

    def is_feasible(self, p, atol=1e-12):
        if self.beta.shape != p.heads.shape:
            return False
        if np.any(np.abs(self.beta) > p.bounds * (1 + atol) + atol):
            return False
        if p.degenerate:
            return True
        v = self.v
        return v is not None and np.all(v >= -atol) and abs(v.sum() - 1.0) <= 1e-9


class InnerZero(Exception):
    """The inner problem has optimal value zero; no descent direction exists."""


def _residual(p, st):
    """``d - P_U(d)``, or ``Bβ - t`` in the degenerate form."""
    if p.degenerate:
        return p.apply_B(st.beta) - p.offset
    d = -p.apply_B(st.beta) / p.M + st.v + p.b_vec
    return d - simplex_project(d)


def dual_objective(p, st):
    """Value of the (rescaled) smooth dual."""
    if not st.is_feasible(p, atol=1e-9):
        raise ValueError("dual state is infeasible")
    r = _residual(p, st)
    return 0.5 * float(np.dot(r, r))


def dual_gradient(p, st):
    """Gradient ``(∂Ψ/∂β, ∂Ψ/∂v)``; ``∂Ψ/∂v`` is ``None`` in the degenerate form."""
    r = _residual(p, st)
    if p.degenerate:
        return p.apply_Bt(r), None
    return -p.apply_Bt(r) / p.M, r


def primal_objective(g, q, gamma, p, f):
    """Nonsmooth inner objective ``R1(f) - <f, t>``."""
    return r1_half(g, q, f, gamma) - float(np.dot(f, p.offset))


def recover_primal(p, st):
    """Unit-norm minimizer of the inner problem associated with a dual point."""
    r = _residual(p, st)
    norm = float(np.linalg.norm(r))
    if norm < ZERO_RESIDUAL:
        raise InnerZero("inner residual vanished")
    # f minimizes <f, z> over the ball; z = -c r (simplex form) or z = r.
    return (r if not p.degenerate else -r) / norm, norm


@dataclass
class InnerResult:
    f: np.ndarray
    value: float
    state: DualState
    iterations: int
    dual_value: float


def _fista_numpy(p, beta, v, L, tol, max_iter, check_every, callback=None):
    """Reference implementation of the accelerated loop; updates in place."""
    bounds = p.bounds
    step = 1.0 / L
    x_beta, x_v = beta.copy(), None if v is None else v.copy()
    y_beta, y_v = x_beta.copy(), None if v is None else v.copy()
    t = 1.0
    prev = None
    k = 0
    for k in range(1, max_iter + 1):
        gb, gv = dual_gradient(p, DualState(y_beta, y_v))
        nb = np.clip(y_beta - step * gb, -bounds, bounds)
        nv = None if p.degenerate else simplex_project(y_v - step * gv)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_next
        y_beta = nb + mom * (nb - x_beta)
        if nv is not None:
            y_v = nv + mom * (nv - x_v)
        x_beta, x_v, t = nb, nv, t_next
        if callback is not None:
            callback(k, DualState(x_beta, x_v))
        if k % check_every == 0:
            r = _residual(p, DualState(x_beta, x_v))
            val = 0.5 * float(np.dot(r, r))
            if val < 0.5 * ZERO_RESIDUAL**2:
                break
            if prev is not None and abs(prev - val) <= tol * max(val, 1e-300):
                break
            prev = val
    beta[:] = x_beta
    if v is not None:
        v[:] = x_v
    return k


def solve_inner(p, tol=1e-8, max_iter=5000, state=None, check_every=10, engine="numba", callback=None):
    """Accelerated projected gradient on the smooth dual.

    Parameters
    ----------
    p : InnerProblem
    tol : float
        Stop when the relative change of the dual objective between checks
        falls below ``tol``.
    max_iter : int
    state : DualState, optional
        Warm start; replaced by the default start if infeasible for ``p``.
    check_every : int
        Objective evaluation period.
    engine : {"numba", "numpy"}
        Compiled loop or the plain numpy reference loop.
    callback : callable, optional
        ``callback(k, state)`` after each projected step (numpy engine only).

    Returns
    -------
    InnerResult
        ``f`` has unit norm and ``value`` is the inner optimal value estimate
        ``-c ||d - P_U(d)||`` (``-||Bβ - t||`` in the degenerate form).

    Raises
    ------
    InnerZero
        When the dual residual vanishes at the final iterate.
    """
    st = DualState.initial(p) if state is None else state.copy()
    if not st.is_feasible(p, atol=1e-9):
        st = DualState.initial(p)
    if p.degenerate:
        L = max(2.0 * p.max_degree(), 1.0)
    else:
        L = LIPSCHITZ
    if engine == "numpy" or callback is not None:
        k = _fista_numpy(p, st.beta, st.v, L, tol, max_iter, check_every, callback)
    elif engine == "numba":
        v = np.zeros(p.n) if st.v is None else st.v
        k = fista(
            p.heads,
            p.tails,
            np.ascontiguousarray(p.bounds, dtype=float),
            np.ascontiguousarray(p.offset if p.degenerate else p.b_vec, dtype=float),
            float(p.M),
            bool(p.degenerate),
            st.beta,
            v,
            float(L),
            float(tol),
            int(max_iter),
            int(check_every),
            0.5 * ZERO_RESIDUAL**2,
        )
    else:
        raise ValueError(f"unknown engine {engine!r}")
    r = _residual(p, st)
    dual_value = 0.5 * float(np.dot(r, r))
    f, norm = recover_primal(p, st)
    scale = 1.0 if p.degenerate else p.c
    return InnerResult(f=f, value=-scale * norm, state=st, iterations=k, dual_value=dual_value)


@dataclass
class DCAResult:
    f: np.ndarray
    lam: float
    history: list = field(default_factory=list)
    steps: int = 0
    reason: str = ""
    inner_iterations: list = field(default_factory=list)


def ratio_dca(g, q, gamma, f0, eps=1e-6, tol=1e-8, max_iter=5000, max_outer=200):
    """Minimize ``F_γ`` by the ratio descent scheme started at ``f0``.

    Each accepted step strictly decreases ``λ = F_γ(f)``.  An outer step that
    fails to descend is retried once with a tighter inner tolerance; if it
    still fails the run stops at the current iterate.

    Returns
    -------
    DCAResult
        ``history`` lists every accepted ``λ``; ``steps`` counts outer
        iterations performed (including a final non-descending one).
    """
    f = np.asarray(f0, dtype=float)
    if not np.all(np.isfinite(f)):
        raise FloatingPointError("non-finite initial vector at outer step 0")
    if f.max() - f.min() <= 0:
        raise ValueError("initial vector must be non-constant")
    f = f / np.linalg.norm(f)
    lam = f_gamma_cont(g, q, f, gamma)
    res = DCAResult(f=f, lam=lam, history=[lam])
    edges = InnerProblem.edges_for(g, q, gamma)
    state = None

    for k in range(max_outer):
        r2 = subgradient_R2(q, f)
        s = subgradient_S(g, f)
        p = InnerProblem.build(g, q, gamma, r2, s, lam, edges=edges)
        res.steps = k + 1
        accepted = False
        for attempt_tol, attempt_iter in ((tol, max_iter), (tol * 1e-3, 4 * max_iter)):
            try:
                inner = solve_inner(p, tol=attempt_tol, max_iter=attempt_iter, state=state)
            except InnerZero:
                res.reason = "inner-zero"
                return res
            res.inner_iterations.append(inner.iterations)
            f_new = inner.f
            if not np.all(np.isfinite(f_new)):
                raise FloatingPointError(f"non-finite iterate at outer step {k + 1}")
            if f_new.max() - f_new.min() <= 0:
                lam_new = np.inf
            else:
                lam_new = f_gamma_cont(g, q, f_new, gamma)
            if not np.isfinite(lam_new) and f_new.max() - f_new.min() > 0:
                raise FloatingPointError(f"non-finite ratio at outer step {k + 1}")
            state = inner.state
            if lam_new < lam:
                accepted = True
                break
            logger.debug("outer step %d did not descend (%.3g >= %.3g)", k + 1, lam_new, lam)
        if not accepted:
            res.reason = "no-descent"
            return res
        rel = (lam - lam_new) / lam
        f, lam = f_new, lam_new
        res.f, res.lam = f, lam
        res.history.append(lam)
        if rel < eps:
            res.reason = "converged"
            return res
    res.reason = "max-outer"
    return res
