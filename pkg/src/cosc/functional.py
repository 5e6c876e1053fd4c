"""
The constrained ratio functional on sets and its continuous extension.

``F̂_γ(C) = (cut(C) + γ (M̂(C) + N̂(C))) / bal(C)`` on bipartitions and

``F_γ(f) = (Σ_ij w_ij |f_i - f_j| + γ M(f) + γ N(f)) / S(f)``

on non-constant vectors, with ``F_γ(1_C) = F̂_γ(C)``.  For the descent
scheme the ratio is split as ``(R1 - γ R2) / S½`` where ``R1``, ``R2`` and
``S½`` carry a factor ``1/2`` relative to the numerator and denominator
above (the ratio is unchanged).
"""

from __future__ import annotations

import numpy as np

from .constraints import violations_cannot, violations_must
from .graph import as_partition, balance, cut

__all__ = [
    "m_of_f",
    "n_of_f",
    "s_of_f",
    "total_variation",
    "numerator",
    "f_gamma_set",
    "f_gamma_cont",
    "optimal_threshold",
    "threshold_values",
    "r1_half",
    "r2_half",
    "s_half",
    "subgradient_S",
    "subgradient_R2",
]


def _pair_abs(arrays, f):
    i, j, q = arrays
    if not q.size:
        return 0.0
    return float(np.dot(q, np.abs(f[i] - f[j])))


def _check_nonconstant(f):
    f = np.asarray(f, dtype=float)
    if f.size == 0 or f.max() - f.min() <= 0:
        raise ValueError("f must be non-constant")
    return f


def m_of_f(q, f):
    """``M(f) = Σ_{i,j} q^m_ij |f_i - f_j|`` over ordered pairs."""
    return 2.0 * _pair_abs(q.must_arrays, np.asarray(f, dtype=float))


def n_of_f(q, f):
    """``N(f) = vol(Q^c)(max f - min f) - Σ_{i,j} q^c_ij |f_i - f_j|``."""
    f = np.asarray(f, dtype=float)
    if not q.cannot:
        return 0.0
    return q.vol_cannot * float(f.max() - f.min()) - 2.0 * _pair_abs(q.cannot_arrays, f)


def s_of_f(g, f):
    """``S(f) = ||B (f - <f,b>/gvol(V) 1)||_1``."""
    f = np.asarray(f, dtype=float)
    mean = np.dot(g.b, f) / g.b.sum()
    return float(np.dot(g.b, np.abs(f - mean)))


def total_variation(g, f):
    """``Σ_{i,j} w_ij |f_i - f_j|`` over ordered pairs."""
    f = np.asarray(f, dtype=float)
    return 2.0 * float(np.dot(g.weights, np.abs(f[g.heads] - f[g.tails])))


def numerator(g, q, f, gamma):
    """``R_γ(f)``."""
    f = np.asarray(f, dtype=float)
    value = total_variation(g, f)
    if gamma:
        value += gamma * (m_of_f(q, f) + n_of_f(q, f))
    return value


def f_gamma_set(g, q, C, gamma):
    """Set functional ``F̂_γ(C)``; equals ``NCut(C)`` on consistent partitions."""
    mask = as_partition(C, g.n)
    penalty = violations_must(q, mask) + violations_cannot(q, mask) if gamma else 0.0
    return (cut(g, mask) + gamma * penalty) / balance(g, mask)


def f_gamma_cont(g, q, f, gamma):
    """Continuous functional ``F_γ(f)``; scale and shift invariant."""
    f = _check_nonconstant(f)
    return numerator(g, q, f, gamma) / s_of_f(g, f)


def threshold_values(g, q, f, gamma):
    """``F̂_γ`` of every non-trivial super-level set of ``f``.

    Returns
    -------
    order : ndarray of int
        Vertices sorted by decreasing ``f``.
    sizes : ndarray of int
        Candidate set sizes; the set of size ``p`` is ``order[:p]``.
    values : ndarray of float
        ``F̂_γ`` of each candidate.
    """
    f = _check_nonconstant(f)
    n = f.size
    order = np.argsort(-f, kind="stable")
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    fs = f[order]
    # Valid prefix sizes end where the sorted value strictly drops.
    sizes = np.nonzero(fs[:-1] > fs[1:])[0] + 1

    def crossing(i, j, w):
        # Pair crosses the prefix of size p iff min(rank) < p <= max(rank).
        acc = np.zeros(n + 1)
        if w.size:
            lo = np.minimum(rank[i], rank[j])
            hi = np.maximum(rank[i], rank[j])
            np.add.at(acc, lo + 1, w)
            np.add.at(acc, hi + 1, -w)
        return np.cumsum(acc)[sizes]

    cut_vals = 2.0 * crossing(g.heads, g.tails, g.weights)
    vol_in = np.cumsum(g.b[order])[sizes - 1]
    total = g.b.sum()
    bal = 2.0 * vol_in * (total - vol_in) / total
    num = cut_vals
    if gamma:
        mi, mj, mq = q.must_arrays
        ci, cj, cq = q.cannot_arrays
        m_hat = 2.0 * crossing(mi, mj, mq)
        n_hat = q.vol_cannot - 2.0 * crossing(ci, cj, cq)
        num = num + gamma * (m_hat + n_hat)
    return order, sizes, num / bal


def optimal_threshold(g, q, f, gamma):
    """Best super-level set ``{i : f_i > t}`` under ``F̂_γ``.

    Ties are broken toward the smaller set.

    Returns
    -------
    mask : ndarray of bool
    value : float
    """
    order, sizes, values = threshold_values(g, q, f, gamma)
    best = values.min()
    tied = np.nonzero(values <= best * (1.0 + 1e-12))[0]
    pick = tied[np.argmin(np.minimum(sizes[tied], g.n - sizes[tied]))]
    mask = np.zeros(g.n, dtype=bool)
    mask[order[: sizes[pick]]] = True
    # The exact evaluation avoids accumulated rounding from the prefix sums.
    return mask, f_gamma_set(g, q, mask, gamma)


def r1_half(g, q, f, gamma):
    """``R1(f) = ½ Σ (w_ij + γ q^m_ij)|f_i - f_j| + (γ/2) vol(Q^c)(max f - min f)``."""
    f = np.asarray(f, dtype=float)
    value = 0.5 * total_variation(g, f)
    if gamma:
        value += 0.5 * gamma * m_of_f(q, f)
        if q.cannot:
            value += 0.5 * gamma * q.vol_cannot * float(f.max() - f.min())
    return value


def r2_half(q, f):
    """``R2(f) = ½ Σ_{i,j} q^c_ij |f_i - f_j|``."""
    return _pair_abs(q.cannot_arrays, np.asarray(f, dtype=float))


def s_half(g, f):
    return 0.5 * s_of_f(g, f)


def subgradient_S(g, f):
    """Element of the subdifferential of ``S½`` orthogonal to the constant vector.

    Uses ``sign(0) = 0``.
    """
    f = np.asarray(f, dtype=float)
    total = g.b.sum()
    x = g.b * np.sign(f - np.dot(g.b, f) / total)
    return 0.5 * (x - g.b * (x.sum() / total))


def subgradient_R2(q, f):
    """Element ``Σ_j q^c_ij sign(f_i - f_j)`` of the subdifferential of ``R2``."""
    f = np.asarray(f, dtype=float)
    out = np.zeros(f.size)
    i, j, w = q.cannot_arrays
    if w.size:
        u = w * np.sign(f[i] - f[j])
        np.add.at(out, i, u)
        np.add.at(out, j, -u)
    return out
