import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bipartitions, random_connected_graph, random_label_constraints
from cosc.constraints import ConstraintSet, is_consistent, violated_count
from cosc.functional import f_gamma_set
from cosc.graph import Graph, knn_graph, ncut
from cosc.pipeline import (
    ConstraintInfeasibleError,
    CoscConfig,
    canonical_labels,
    cosc_bipartition,
    gamma_for_violations,
    multi_partition,
    multicut_value,
    violation_budget,
)


def test_gamma_for_violations():
    assert gamma_for_violations(0.1, 4.0, 0) == pytest.approx(0.1)
    assert gamma_for_violations(0.1, 4.0, 1) == pytest.approx(0.05)
    assert gamma_for_violations(0.1, 4.0, 10**9) < 1e-9


def test_violation_budget():
    assert violation_budget(10, 3) == 3
    assert violation_budget(10, 2) == 0
    assert violation_budget(0, 5) == 0
    assert violation_budget(30, 3) == 10
    with pytest.raises(ValueError):
        violation_budget(5, 1.5)


def test_multicut_value(g4):
    assert multicut_value(g4, [0, 1, 2, 2]) == pytest.approx(2.9)
    assert multicut_value(g4, [0, 0, 1, 1]) == pytest.approx(0.2)
    for mask in bipartitions(4):
        labels = np.where(mask, 0, 1)
        assert multicut_value(g4, labels) == pytest.approx(2 * ncut(g4, mask))
    with pytest.raises(ValueError):
        multicut_value(g4, [0, 0, 2, 2])
    with pytest.raises(ValueError):
        multicut_value(g4, [0, 0, 0, 0])


def test_canonical_labels():
    assert canonical_labels([2, 2, 0, 1, 0]).tolist() == [0, 0, 1, 2, 1]


def test_config_validation():
    with pytest.raises(ValueError):
        CoscConfig(mode="medium")
    with pytest.raises(ValueError):
        CoscConfig(restarts=0)
    with pytest.raises(ValueError):
        CoscConfig(max_violations=-1)
    assert CoscConfig(mode="soft", max_violations=3).budget == 3
    assert CoscConfig(mode="hard", max_violations=3).budget == 0


# bipartition


def test_hard_bipartition_path(g4, cs1):
    mask, report = cosc_bipartition(g4, cs1)
    assert mask.tolist() == [True, True, False, False]
    assert report.ncut == pytest.approx(0.1)
    assert report.violated == 0


def test_unconstrained_bipartition_path(g4):
    mask, report = cosc_bipartition(g4, ConstraintSet(n=4))
    assert mask.tolist() == [True, True, False, False]
    assert report.ncut == pytest.approx(0.1)


def test_hard_mode_forces_costly_split(g4):
    # Keeping 1 and 2 apart is free; a cannot-link on (0, 1) forces a worse cut.
    q = ConstraintSet(cannot=[(0, 1)], n=4)
    mask, report = cosc_bipartition(g4, q)
    assert is_consistent(q, mask)
    best = min(ncut(g4, m) for m in bipartitions(4) if is_consistent(q, m))
    assert report.ncut == pytest.approx(best)


def test_infeasible_hard_mode_raises():
    g = Graph(3, [0, 1, 0], [1, 2, 2], np.ones(3))
    q = ConstraintSet(cannot=[(0, 1), (1, 2), (0, 2)], n=3)
    with pytest.raises(ConstraintInfeasibleError):
        cosc_bipartition(g, q)
    mask, report = cosc_bipartition(g, q, CoscConfig(mode="soft", max_violations=1))
    assert report.violated == 1


def test_must_links_merging_everything_is_an_error(g4):
    q = ConstraintSet(must=[(0, 1), (1, 2), (2, 3)], n=4)
    with pytest.raises(ConstraintInfeasibleError):
        cosc_bipartition(g4, q)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), merge=st.sampled_from([None, False]))
def test_hard_bipartition_is_consistent(seed, merge):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    g = random_connected_graph(rng, n)
    q = random_label_constraints(rng, n, int(rng.integers(1, n)))
    mask, report = cosc_bipartition(g, q, CoscConfig(restarts=3, merge_must_links=merge, seed=seed))
    assert is_consistent(q, mask)
    assert mask[0]
    assert report.ncut == pytest.approx(ncut(g, mask))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), l=st.integers(0, 3))
def test_soft_bipartition_respects_budget_when_attainable(seed, l):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 10))
    g = random_connected_graph(rng, n)
    pairs = {tuple(sorted(rng.choice(n, 2, replace=False).tolist())) for _ in range(n)}
    kinds = rng.integers(0, 2, len(pairs))
    q = ConstraintSet([p for p, k in zip(pairs, kinds) if k == 0], [p for p, k in zip(pairs, kinds) if k], n=n)
    attainable = min(violated_count(q, m) for m in bipartitions(n))
    mask, report = cosc_bipartition(g, q, CoscConfig(mode="soft", max_violations=l, restarts=3, seed=seed))
    if attainable <= l:
        assert report.violated <= l


def test_report_schedule_ends_at_final_gamma(g4):
    q = ConstraintSet(cannot=[(0, 1)], n=4)
    mask, report = cosc_bipartition(g4, q)
    gammas = [s[0] for s in report.schedule]
    assert gammas[0] == 0 and gammas == sorted(gammas)
    assert report.gamma_final == gammas[-1]
    assert report.gamma_cap is not None and report.gamma_final <= report.gamma_cap
    assert report.violated == 0
    assert report.value == pytest.approx(f_gamma_set(g4, q, mask, report.gamma_final))


# multi-partition


def blobs(seed, sizes=(30, 30, 30)):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 3.5]])
    X = np.vstack([c + rng.standard_normal((m, 2)) for c, m in zip(centers, sizes)])
    y = np.repeat(np.arange(len(sizes)), sizes)
    return knn_graph(X, 10), y


def test_multi_partition_two_classes_equals_bipartition():
    g, _ = blobs(0, sizes=(30, 30))
    rng = np.random.default_rng(1)
    q = random_label_constraints(rng, g.n, 10)
    cfg = CoscConfig(restarts=4, seed=3)
    labels, report = multi_partition(g, q, 2, cfg)
    mask, brep = cosc_bipartition(g, q, cfg)
    assert labels.tolist() == np.where(mask, 0, 1).tolist()
    assert report.multicut == pytest.approx(2 * brep.ncut)


def test_multi_partition_commits_argmin():
    g, y = blobs(2)
    labels, report = multi_partition(g, ConstraintSet(n=g.n), 4, CoscConfig(restarts=3))
    assert len(report.levels) == 3
    for level in report.levels:
        assert level["multicut"] == min(level["candidates"])
    assert report.multicut == pytest.approx(report.levels[-1]["multicut"])
    assert sorted(set(labels.tolist())) == [0, 1, 2, 3] and labels[0] == 0


def test_multi_partition_hard_satisfies_constraints():
    g, y = blobs(4)
    rng = np.random.default_rng(0)
    pairs = {tuple(sorted(rng.choice(g.n, 2, replace=False).tolist())) for _ in range(25)}
    q = ConstraintSet([p for p in pairs if y[p[0]] == y[p[1]]], [p for p in pairs if y[p[0]] != y[p[1]]], n=g.n)
    labels, report = multi_partition(g, q, 3, CoscConfig(restarts=4))
    assert report.violated == 0
    assert all(labels[i] == labels[j] for i, j in q.must)
    assert all(labels[i] != labels[j] for i, j in q.cannot)


def test_multi_partition_rejects_disconnected_graph():
    g = Graph(4, [0, 2], [1, 3], [1.0, 1.0], check_connected=False)
    with pytest.raises(ValueError, match="connected"):
        multi_partition(g, ConstraintSet(n=4), 2)


def test_multi_partition_needs_splittable_components(g4):
    q = ConstraintSet(must=[(0, 1), (2, 3)], n=4)
    with pytest.raises(ValueError, match="splittable"):
        multi_partition(g4, q, 3)
