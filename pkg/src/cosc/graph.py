"""
Weighted graphs, balanced cut criteria and must-link contraction.

A graph carries symmetric nonnegative edge weights ``w`` and positive vertex
weights ``b``.  Ratio cut corresponds to ``b = 1`` and the classical
normalized cut to ``b = d`` (the weighted degree).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

__all__ = [
    "Graph",
    "as_partition",
    "cut",
    "gvol",
    "balance",
    "ncut",
    "knn_graph",
    "merge_must_links",
    "read_graph",
    "write_graph",
    "UnionFind",
]


class Graph:
    """Undirected graph with edge weights and vertex weights.

    Each unordered edge is stored once with ``i < j``.  The arrays
    ``heads``, ``tails`` and ``weights`` fix the edge index space used by the
    dual solver.

    Parameters
    ----------
    n : int
        Number of vertices.
    heads, tails : array_like of int
        Endpoints of the edges.  Pairs are canonicalized to ``i < j`` and
        parallel entries are summed.
    weights : array_like of float
        Positive edge weights.
    vertex_weights : array_like of float or {"ratio", "normalized"}
        Positive vertex weights, or a mode: ``"ratio"`` gives ``b_i = 1`` and
        ``"normalized"`` gives ``b_i = d_i``.
    check_connected : bool
        Raise ``ValueError`` when the graph is not connected.
    """

    def __init__(self, n, heads, tails, weights, vertex_weights="ratio", check_connected=True):
        n = int(n)
        if n < 1:
            raise ValueError("graph needs at least one vertex")
        heads = np.asarray(heads, dtype=np.int64).ravel()
        tails = np.asarray(tails, dtype=np.int64).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if not (heads.shape == tails.shape == weights.shape):
            raise ValueError("edge arrays must have equal length")
        if heads.size and (min(heads.min(), tails.min()) < 0 or max(heads.max(), tails.max()) >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(heads == tails):
            raise ValueError("self-loops are not allowed")
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
            raise ValueError("edge weights must be positive and finite")

        lo = np.minimum(heads, tails)
        hi = np.maximum(heads, tails)
        W = sparse.coo_matrix((weights, (lo, hi)), shape=(n, n)).tocsr()
        W.sum_duplicates()
        W = W.tocoo()
        order = np.lexsort((W.col, W.row))
        self.n = n
        self.heads = W.row[order].astype(np.int64)
        self.tails = W.col[order].astype(np.int64)
        self.weights = W.data[order].astype(float)
        upper = sparse.coo_matrix((self.weights, (self.heads, self.tails)), shape=(n, n))
        self.W = (upper + upper.T).tocsr()
        self.degrees = np.asarray(self.W.sum(axis=1)).ravel()

        if isinstance(vertex_weights, str):
            if vertex_weights == "ratio":
                b = np.ones(n)
            elif vertex_weights == "normalized":
                b = self.degrees.copy()
            else:
                raise ValueError(f"unknown vertex weight mode {vertex_weights!r}")
        else:
            b = np.asarray(vertex_weights, dtype=float).ravel()
            if b.shape != (n,):
                raise ValueError("vertex_weights must have length n")
        if np.any(~np.isfinite(b)) or np.any(b <= 0):
            raise ValueError("vertex weights must be positive")
        self.b = b

        if check_connected and not self.is_connected():
            raise ValueError("graph is not connected")

    @property
    def num_edges(self):
        return self.heads.size

    @property
    def total_volume(self):
        return math.fsum(self.b)

    def is_connected(self):
        if self.n == 1:
            return True
        ncomp, _ = csgraph.connected_components(self.W, directed=False)
        return ncomp == 1

    def components(self):
        """Label array of the connected components."""
        _, labels = csgraph.connected_components(self.W, directed=False)
        return labels

    def subgraph(self, vertices, check_connected=True):
        """Induced subgraph on ``vertices`` (keeps the vertex weights)."""
        vertices = np.asarray(vertices, dtype=np.int64)
        index = -np.ones(self.n, dtype=np.int64)
        index[vertices] = np.arange(vertices.size)
        keep = (index[self.heads] >= 0) & (index[self.tails] >= 0)
        return Graph(
            vertices.size,
            index[self.heads[keep]],
            index[self.tails[keep]],
            self.weights[keep],
            vertex_weights=self.b[vertices],
            check_connected=check_connected,
        )

    def dense(self):
        return self.W.toarray()

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.num_edges}, gvol={self.total_volume:g})"


def as_partition(C, n):
    """Boolean membership vector of length ``n`` from a mask or an index list."""
    C = np.asarray(C)
    if C.dtype == bool:
        if C.shape != (n,):
            raise ValueError("partition mask must have length n")
        return C.copy()
    mask = np.zeros(n, dtype=bool)
    if C.size:
        idx = C.astype(np.int64)
        if idx.min() < 0 or idx.max() >= n:
            raise ValueError("partition index out of range")
        mask[idx] = True
    return mask


def _nontrivial(mask):
    if mask.all() or not mask.any():
        raise ValueError("partition must be non-trivial (neither empty nor all vertices)")


def cut(g, C):
    """``cut(C, C̄) = 2 Σ_{i∈C, j∈C̄} w_ij``."""
    mask = as_partition(C, g.n)
    _nontrivial(mask)
    crossing = mask[g.heads] != mask[g.tails]
    return 2.0 * float(g.weights[crossing].sum())


def gvol(g, C):
    return float(g.b[as_partition(C, g.n)].sum())


def balance(g, C):
    """``bal(C) = 2 gvol(C) gvol(C̄) / gvol(V)``."""
    mask = as_partition(C, g.n)
    _nontrivial(mask)
    inside = g.b[mask].sum()
    total = g.b.sum()
    return float(2.0 * inside * (total - inside) / total)


def ncut(g, C):
    return cut(g, C) / balance(g, C)


def knn_graph(points, k, vertex_weights="ratio"):
    """Symmetric k-nearest-neighbor graph with locally scaled Gaussian weights.

    An edge ``(i, j)`` is kept when either endpoint is among the ``k``
    nearest neighbors of the other.  The weight is
    ``exp(-|x_i - x_j|^2 / (sigma_i sigma_j))`` where ``sigma_i`` is the
    distance from ``x_i`` to its k-th neighbor.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    k = int(k)
    if n < 2:
        raise ValueError("need at least two points")
    if not 1 <= k < n:
        raise ValueError("k must satisfy 1 <= k < number of points")

    tree = cKDTree(X)
    dist, idx = tree.query(X, k=k + 1)
    # Column 0 is usually the point itself, but duplicates can displace it.
    nbr_idx = np.empty((n, k), dtype=np.int64)
    nbr_dist = np.empty((n, k))
    for i in range(n):
        keep = idx[i] != i
        row_idx, row_dist = idx[i][keep][:k], dist[i][keep][:k]
        nbr_idx[i], nbr_dist[i] = row_idx, row_dist
    sigma = nbr_dist[:, -1].copy()
    positive = sigma[sigma > 0]
    sigma[sigma <= 0] = positive.min() if positive.size else 1.0

    rows = np.repeat(np.arange(n), k)
    cols = nbr_idx.ravel()
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
    sq = np.sum((X[pairs[:, 0]] - X[pairs[:, 1]]) ** 2, axis=1)
    w = np.exp(-sq / (sigma[pairs[:, 0]] * sigma[pairs[:, 1]]))
    w = np.maximum(w, np.finfo(float).tiny)

    g = Graph(n, pairs[:, 0], pairs[:, 1], w, vertex_weights=vertex_weights, check_connected=False)
    if not g.is_connected():
        raise ValueError(f"k-NN graph with k={k} is disconnected; increase k")
    return g


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return rx
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]
        return rx

    def labels(self):
        """Component label per element, numbered by smallest member."""
        roots = [self.find(x) for x in range(len(self.parent))]
        relabel = {}
        out = np.empty(len(roots), dtype=np.int64)
        for x, r in enumerate(roots):
            if r not in relabel:
                relabel[r] = len(relabel)
            out[x] = relabel[r]
        return out


def merge_must_links(g, ml_pairs):
    """Contract every connected component of the must-link graph.

    Vertex weights of merged vertices are summed, parallel edges are summed
    and edges inside a merged vertex are dropped.  Reduced vertices are
    numbered in order of their smallest original vertex.

    Returns
    -------
    reduced : Graph
    vertex_map : ndarray of int
        ``vertex_map[i]`` is the reduced vertex containing original ``i``.
    """
    uf = UnionFind(g.n)
    for i, j in ml_pairs:
        if not (0 <= i < g.n and 0 <= j < g.n):
            raise ValueError(f"must-link pair ({i}, {j}) out of range")
        uf.union(int(i), int(j))
    vertex_map = uf.labels()
    n_red = int(vertex_map.max()) + 1
    b = np.bincount(vertex_map, weights=g.b, minlength=n_red)
    h, t = vertex_map[g.heads], vertex_map[g.tails]
    keep = h != t
    reduced = Graph(n_red, h[keep], t[keep], g.weights[keep], vertex_weights=b, check_connected=False)
    return reduced, vertex_map


def read_graph(path, vertex_weights="ratio", check_connected=True):
    """Read the ``n m`` / ``i j w`` edge-list format."""
    with open(path) as fh:
        lines = [(no, ln.split()) for no, ln in enumerate(fh, start=1)]
    lines = [(no, parts) for no, parts in lines if parts and not parts[0].startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty graph file")
    no, header = lines[0]
    try:
        n, m = int(header[0]), int(header[1])
    except (ValueError, IndexError):
        raise ValueError(f"{path}:{no}: expected header 'n m'") from None
    body = lines[1:]
    if len(body) != m:
        raise ValueError(f"{path}: header announces {m} edges, found {len(body)}")
    heads, tails, weights = [], [], []
    for no, parts in body:
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except (ValueError, IndexError):
            raise ValueError(f"{path}:{no}: expected 'i j w'") from None
        if len(parts) != 3 or not (0 <= i < j < n) or not w > 0:
            raise ValueError(f"{path}:{no}: invalid edge line")
        heads.append(i)
        tails.append(j)
        weights.append(w)
    return Graph(n, heads, tails, weights, vertex_weights=vertex_weights, check_connected=check_connected)


def write_graph(g, path):
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.num_edges}\n")
        for i, j, w in zip(g.heads, g.tails, g.weights):
            fh.write(f"{i} {j} {float(w)!r}\n")
