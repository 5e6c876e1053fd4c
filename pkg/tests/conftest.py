import itertools

import numpy as np
import pytest

from cosc.constraints import ConstraintSet
from cosc.graph import Graph


def path4():
    """Path 0-1-2-3 with weights 1, 0.1, 1 and unit vertex weights."""
    return Graph(4, [0, 1, 2], [1, 2, 3], [1.0, 0.1, 1.0])


def q1():
    return ConstraintSet(must=[(0, 1)], cannot=[(0, 3)], n=4)


def random_connected_graph(rng, n, p=0.4, vertex_weights="ratio"):
    """Random spanning tree plus Erdos-Renyi edges, uniform weights in (0.1, 1]."""
    edges = {}
    perm = rng.permutation(n)
    for a in range(1, n):
        i, j = perm[a], perm[rng.integers(0, a)]
        edges[(min(i, j), max(i, j))] = 1.0
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p:
            edges[(i, j)] = 1.0
    pairs = sorted(edges)
    w = rng.uniform(0.1, 1.0, size=len(pairs))
    heads, tails = zip(*pairs)
    return Graph(n, heads, tails, w, vertex_weights=vertex_weights)


def random_label_constraints(rng, n, count):
    """Binary constraints consistent with a random 2-labelling (hence feasible)."""
    y = rng.integers(0, 2, size=n)
    y[rng.integers(0, n)] ^= 1 if y.min() == y.max() else 0
    pairs = {tuple(sorted(rng.choice(n, 2, replace=False).tolist())) for _ in range(count)}
    must = [p for p in pairs if y[p[0]] == y[p[1]]]
    cannot = [p for p in pairs if y[p[0]] != y[p[1]]]
    return ConstraintSet(must, cannot, n=n)


def random_constraints(rng, n, count, fractional=False):
    """Arbitrary (possibly infeasible) constraints."""
    pairs = list({tuple(sorted(rng.choice(n, 2, replace=False).tolist())) for _ in range(count)})
    kinds = rng.integers(0, 2, size=len(pairs))
    q = rng.uniform(0.0, 1.0, size=len(pairs)) if fractional else np.ones(len(pairs))
    must = [(i, j, w) for (i, j), k, w in zip(pairs, kinds, q) if k == 0]
    cannot = [(i, j, w) for (i, j), k, w in zip(pairs, kinds, q) if k == 1]
    return ConstraintSet(must, cannot, n=n)


def bipartitions(n):
    """All 2^(n-1) - 1 non-trivial bipartitions, vertex 0 on the first side."""
    for bits in range(2 ** (n - 1) - 1):
        mask = np.ones(n, dtype=bool)
        mask[1:] = [(bits >> (v - 1)) & 1 for v in range(1, n)]
        yield mask


@pytest.fixture
def g4():
    return path4()


@pytest.fixture
def cs1():
    return q1()


_ACCEPTANCE = []


@pytest.fixture
def record():
    """Log a one-line PASS/FAIL verdict for an acceptance criterion."""

    def _record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
