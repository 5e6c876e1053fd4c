"""
Pairwise must-link / cannot-link constraints.

Constraints are weighted (``q`` in ``[0, 1]`` for degree-of-belief
constraints, ``q = 1`` for ordinary ones) and stored once per unordered
pair.  The violation counts follow the double-counting convention of the
cut: ``violations_must + violations_cannot`` is twice the (weighted) number
of violated constraints.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .graph import UnionFind, as_partition

__all__ = [
    "ConstraintSet",
    "Infeasible",
    "violations_must",
    "violations_cannot",
    "violated_count",
    "is_consistent",
    "find_consistent_partition",
    "find_low_violation_partition",
    "read_constraints",
    "write_constraints",
]

_EXACT = 1e-12


def _canonical(items, kind):
    out = {}
    for (i, j), q in items:
        i, j, q = int(i), int(j), float(q)
        if i == j:
            raise ValueError(f"{kind} constraint on a single vertex ({i}, {j})")
        if i < 0 or j < 0:
            raise ValueError(f"{kind} constraint with negative index ({i}, {j})")
        if not np.isfinite(q) or q < 0:
            raise ValueError(f"{kind} constraint weight must be nonnegative, got {q}")
        key = (min(i, j), max(i, j))
        out[key] = out.get(key, 0.0) + q
    return {k: v for k, v in out.items() if v > 0}


def _as_items(pairs):
    """Accept a dict ``{(i, j): q}`` or an iterable of ``(i, j)`` / ``(i, j, q)``."""
    if pairs is None:
        return []
    if isinstance(pairs, dict):
        return list(pairs.items())
    items = []
    for p in pairs:
        if len(p) == 2:
            items.append(((p[0], p[1]), 1.0))
        else:
            items.append(((p[0], p[1]), p[2]))
    return items


class ConstraintSet:
    """Symmetric must-link and cannot-link pair weights.

    Parameters
    ----------
    must, cannot : dict or iterable, optional
        ``{(i, j): q}`` or a sequence of ``(i, j)`` / ``(i, j, q)``.  Repeated
        pairs have their weights summed.
    n : int, optional
        Number of vertices; when given, indices are range-checked.
    """

    def __init__(self, must=None, cannot=None, n=None):
        self.must = _canonical(_as_items(must), "must-link")
        self.cannot = _canonical(_as_items(cannot), "cannot-link")
        both = set(self.must) & set(self.cannot)
        if both:
            raise ValueError(f"pairs listed as both must-link and cannot-link: {sorted(both)[:5]}")
        self.n = n
        if n is not None:
            for i, j in list(self.must) + list(self.cannot):
                if j >= n:
                    raise ValueError(f"constraint ({i}, {j}) out of range for n={n}")
        self._must_arr = self._arrays(self.must)
        self._cannot_arr = self._arrays(self.cannot)

    @staticmethod
    def _arrays(d):
        if not d:
            return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
        keys = sorted(d)
        i = np.array([k[0] for k in keys], dtype=np.int64)
        j = np.array([k[1] for k in keys], dtype=np.int64)
        q = np.array([d[k] for k in keys], dtype=float)
        return i, j, q

    @property
    def must_arrays(self):
        return self._must_arr

    @property
    def cannot_arrays(self):
        return self._cannot_arr

    @property
    def vol_cannot(self):
        """``vol(Q^c)``: the sum of ``q^c_ij`` over ordered pairs."""
        return 2.0 * float(self._cannot_arr[2].sum())

    @property
    def num_constraints(self):
        return len(self.must) + len(self.cannot)

    @property
    def total_weight(self):
        return float(self._must_arr[2].sum() + self._cannot_arr[2].sum())

    def is_binary(self):
        return all(q == 1.0 for q in self.must.values()) and all(q == 1.0 for q in self.cannot.values())

    def is_empty(self):
        return not self.must and not self.cannot

    def map_vertices(self, vertex_map, n=None):
        """Carry the constraints to a contracted graph.

        Must-links that fall inside one reduced vertex are dropped (they are
        satisfied by every partition).  Cannot-links inside one reduced vertex
        can never be satisfied; they are returned separately.

        Returns
        -------
        reduced : ConstraintSet
        lost_cannot : dict
            Cannot-link pairs of the original set that collapsed.
        """
        vertex_map = np.asarray(vertex_map)
        must, cannot, lost = [], [], {}
        for (i, j), q in self.must.items():
            a, b = vertex_map[i], vertex_map[j]
            if a != b:
                must.append((a, b, q))
        for (i, j), q in self.cannot.items():
            a, b = vertex_map[i], vertex_map[j]
            if a != b:
                cannot.append((a, b, q))
            else:
                lost[(i, j)] = q
        return ConstraintSet(must, cannot, n=n), lost

    def restrict(self, vertices):
        """Constraints with both endpoints in ``vertices``, reindexed to positions."""
        index = {int(v): k for k, v in enumerate(vertices)}
        must = [(index[i], index[j], q) for (i, j), q in self.must.items() if i in index and j in index]
        cannot = [(index[i], index[j], q) for (i, j), q in self.cannot.items() if i in index and j in index]
        return ConstraintSet(must, cannot, n=len(index))

    def __eq__(self, other):
        return isinstance(other, ConstraintSet) and self.must == other.must and self.cannot == other.cannot

    def __repr__(self):
        return f"ConstraintSet(must={len(self.must)}, cannot={len(self.cannot)})"


class Infeasible:
    """Marker returned when no consistent non-trivial bipartition exists."""

    def __init__(self, reason):
        self.reason = reason

    def __bool__(self):
        return False

    def __repr__(self):
        return f"Infeasible({self.reason!r})"


def _crossing_weight(arrays, mask):
    i, j, q = arrays
    if not q.size:
        return 0.0
    return float(q[mask[i] != mask[j]].sum())


def _mask_for(q, C):
    C = np.asarray(C)
    if C.dtype == bool:
        return C
    n = q.n
    if n is None:
        n = 1 + max([int(C.max()) if C.size else 0] + [k[1] for k in list(q.must) + list(q.cannot)])
    return as_partition(C, n)


def violations_must(q, C):
    """``M̂(C) = 2 Σ_{i∈C, j∈C̄} q^m_ij``."""
    return 2.0 * _crossing_weight(q.must_arrays, _mask_for(q, C))


def violations_cannot(q, C):
    """``N̂(C) = vol(Q^c) - 2 Σ_{i∈C, j∈C̄} q^c_ij``."""
    return q.vol_cannot - 2.0 * _crossing_weight(q.cannot_arrays, _mask_for(q, C))


def violated_count(q, C):
    """Weighted number of violated constraints, ``(M̂ + N̂) / 2``."""
    mask = _mask_for(q, C)
    return 0.5 * (violations_must(q, mask) + violations_cannot(q, mask))


def is_consistent(q, C):
    mask = _mask_for(q, C)
    return violations_must(q, mask) <= _EXACT and violations_cannot(q, mask) <= _EXACT


def _contract(q, n):
    uf = UnionFind(n)
    for i, j in q.must:
        uf.union(i, j)
    comp = uf.labels()
    ncomp = int(comp.max()) + 1
    adj = [dict() for _ in range(ncomp)]
    self_conflict = 0.0
    for (i, j), w in q.cannot.items():
        a, b = comp[i], comp[j]
        if a == b:
            self_conflict += w
            continue
        adj[a][b] = adj[a].get(b, 0.0) + w
        adj[b][a] = adj[b].get(a, 0.0) + w
    return comp, adj, self_conflict


def _fix_trivial(color, comp, adj):
    """Flip one unconstrained component when everything landed on one side."""
    if color.min() != color.max():
        return color
    for c in range(len(adj)):
        if not adj[c] and len(adj) > 1:
            color = color.copy()
            color[c] = 1 - color[c]
            return color
    return None


def _lift(color, comp):
    side = color[comp]
    return side == side[0]


def find_consistent_partition(q, n):
    """Consistent non-trivial bipartition by 2-coloring the constraint graph.

    Must-link components are contracted first; the cannot-link graph on the
    contracted vertices is then 2-colored by BFS.  The returned mask is the
    color class containing vertex 0.

    Returns
    -------
    ndarray of bool or Infeasible
    """
    if n < 2:
        return Infeasible("need at least two vertices")
    comp, adj, self_conflict = _contract(q, n)
    if self_conflict > 0:
        return Infeasible("a cannot-link pair lies inside a must-link component")
    ncomp = len(adj)
    color = -np.ones(ncomp, dtype=np.int64)
    for start in range(ncomp):
        if color[start] >= 0:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            a = queue.popleft()
            for b in sorted(adj[a]):
                if color[b] < 0:
                    color[b] = 1 - color[a]
                    queue.append(b)
                elif color[b] == color[a]:
                    return Infeasible("cannot-link graph has an odd cycle")
    color = _fix_trivial(color, comp, adj)
    if color is None:
        return Infeasible("constraints force a trivial partition")
    mask = _lift(color, comp)
    assert is_consistent(q, mask)
    return mask


_EXACT_LIMIT = 16


def _fewest_violations_exact(q, n):
    # All 2^(n-1) - 1 non-trivial bipartitions with vertex 0 on the first side.
    codes = np.arange(2 ** (n - 1) - 1, dtype=np.int64)
    masks = np.ones((codes.size, n), dtype=bool)
    masks[:, 1:] = (codes[:, None] >> np.arange(n - 1)) & 1
    cost = np.zeros(codes.size)
    for (i, j), w in q.must.items():
        cost += w * (masks[:, i] != masks[:, j])
    for (i, j), w in q.cannot.items():
        cost += w * (masks[:, i] == masks[:, j])
    best = int(np.argmin(cost))
    return masks[best], float(cost[best])


def find_low_violation_partition(q, n, max_sweeps=100):
    """Non-trivial bipartition with few violated constraints.

    Exact by enumeration for ``n <= 16``.  Otherwise every must-link is kept
    (components are contracted), the cannot-link graph is greedily 2-colored
    and then improved by single-component flips.  Used when the constraints
    admit no consistent partition.

    Returns
    -------
    mask : ndarray of bool or None
        ``None`` when only a trivial partition respects the must-links.
    violated : float
        Weighted number of violated constraints of ``mask``.
    """
    if n < 2:
        return None, np.inf
    if n <= _EXACT_LIMIT:
        return _fewest_violations_exact(q, n)
    comp, adj, _ = _contract(q, n)
    ncomp = len(adj)
    if ncomp < 2:
        return None, np.inf
    color = -np.ones(ncomp, dtype=np.int64)
    order = sorted(range(ncomp), key=lambda c: -sum(adj[c].values()))
    for start in order:
        if color[start] >= 0:
            continue
        queue, queued = deque([start]), {start}
        while queue:
            a = queue.popleft()
            # Side with the larger conflicting weight loses.
            on0 = sum(w for b, w in adj[a].items() if color[b] == 0)
            on1 = sum(w for b, w in adj[a].items() if color[b] == 1)
            color[a] = 1 if on0 > on1 else 0
            for b in sorted(adj[a]):
                if color[b] < 0 and b not in queued:
                    queued.add(b)
                    queue.append(b)
    for _ in range(max_sweeps):
        improved = False
        for a in range(ncomp):
            same = sum(w for b, w in adj[a].items() if color[b] == color[a])
            other = sum(w for b, w in adj[a].items() if color[b] != color[a])
            if same > other + _EXACT:
                color[a] = 1 - color[a]
                improved = True
        if not improved:
            break
    color = _fix_trivial(color, comp, adj)
    if color is None:
        return None, np.inf
    mask = _lift(color, comp)
    return mask, violated_count(q, mask)


def read_constraints(path, n=None):
    """Read ``ML i j [q]`` / ``CL i j [q]`` lines."""
    must, cannot, seen = [], [], set()
    with open(path) as fh:
        for no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            kind = parts[0].upper()
            try:
                if kind not in ("ML", "CL") or len(parts) not in (3, 4):
                    raise ValueError
                i, j = int(parts[1]), int(parts[2])
                qv = float(parts[3]) if len(parts) == 4 else 1.0
            except ValueError:
                raise ValueError(f"{path}:{no}: expected 'ML i j [q]' or 'CL i j [q]'") from None
            if not 0.0 <= qv <= 1.0:
                raise ValueError(f"{path}:{no}: weight {qv} outside [0, 1]")
            if i == j or i < 0 or j < 0 or (n is not None and max(i, j) >= n):
                raise ValueError(f"{path}:{no}: invalid vertex pair ({i}, {j})")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"{path}:{no}: duplicate constraint on pair {key}")
            seen.add(key)
            (must if kind == "ML" else cannot).append((i, j, qv))
    return ConstraintSet(must, cannot, n=n)


def write_constraints(q, path):
    with open(path, "w") as fh:
        for (i, j), w in sorted(q.must.items()):
            fh.write(f"ML {i} {j} {w!r}\n")
        for (i, j), w in sorted(q.cannot.items()):
            fh.write(f"CL {i} {j} {w!r}\n")
