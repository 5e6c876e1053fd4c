import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bipartitions, random_constraints
from cosc.constraints import (
    ConstraintSet,
    Infeasible,
    find_consistent_partition,
    find_low_violation_partition,
    is_consistent,
    read_constraints,
    violated_count,
    violations_cannot,
    violations_must,
    write_constraints,
)


def test_must_violations(cs1):
    assert violations_must(cs1, [0, 2]) == 2
    assert violations_must(cs1, [0, 1]) == 0
    empty = ConstraintSet(n=4)
    assert all(violations_must(empty, m) == 0 for m in bipartitions(4))


def test_cannot_violations(cs1):
    assert violations_cannot(cs1, [0, 1]) == 0
    assert violations_cannot(cs1, [0, 3]) == 2
    empty = ConstraintSet(n=4)
    assert all(violations_cannot(empty, m) == 0 for m in bipartitions(4))


def test_is_consistent(cs1):
    assert is_consistent(cs1, [0, 1])
    assert not is_consistent(cs1, [0, 3])
    empty = ConstraintSet(n=4)
    assert all(is_consistent(empty, m) for m in bipartitions(4))


def test_violated_count_is_pair_count(cs1):
    assert violated_count(cs1, [0, 2]) == 1
    assert violated_count(cs1, [0, 3]) == 2


def test_set_normalizes_pairs():
    q = ConstraintSet(must=[(3, 1), (1, 3, 0.5)], cannot={(2, 0): 1.0}, n=4)
    assert q.must == {(1, 3): 1.5}
    assert q.cannot == {(0, 2): 1.0}
    assert q.vol_cannot == 2.0
    assert q.num_constraints == 2


@pytest.mark.parametrize(
    "kwargs",
    [
        {"must": [(0, 0)]},
        {"must": [(0, 1, -0.5)]},
        {"must": [(0, 1)], "cannot": [(1, 0)]},
        {"cannot": [(0, 7)], "n": 4},
    ],
)
def test_set_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        ConstraintSet(**kwargs)


def test_map_vertices_reports_collapsed_cannot_links():
    q = ConstraintSet(must=[(0, 1)], cannot=[(2, 3), (1, 2)], n=4)
    reduced, lost = q.map_vertices([0, 0, 1, 1], n=2)
    assert reduced.must == {}
    assert reduced.cannot == {(0, 1): 1.0}
    assert lost == {(2, 3): 1.0}


def test_restrict_reindexes():
    q = ConstraintSet(must=[(1, 4)], cannot=[(0, 4), (2, 4)], n=5)
    r = q.restrict([2, 4, 1])
    assert r.must == {(1, 2): 1.0}
    assert r.cannot == {(0, 1): 1.0}


# 2-coloring


def test_consistent_partition_q1(cs1):
    mask = find_consistent_partition(cs1, 4)
    assert mask[0] and mask[1] and not mask[3]
    assert is_consistent(cs1, mask)


def test_consistent_partition_unconstrained():
    mask = find_consistent_partition(ConstraintSet(n=4), 4)
    assert mask.tolist() == [True, False, False, False]


def test_cannot_link_triangle_is_infeasible():
    q = ConstraintSet(cannot=[(0, 1), (1, 2), (0, 2)], n=3)
    result = find_consistent_partition(q, 3)
    assert isinstance(result, Infeasible)
    assert not result


def test_cannot_link_inside_must_component_is_infeasible():
    q = ConstraintSet(must=[(0, 1), (1, 2)], cannot=[(0, 2)], n=4)
    assert isinstance(find_consistent_partition(q, 4), Infeasible)


def test_must_links_spanning_everything_force_trivial():
    q = ConstraintSet(must=[(0, 1), (1, 2)], n=3)
    assert isinstance(find_consistent_partition(q, 3), Infeasible)


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_consistent_partition_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    q = random_constraints(rng, n, int(rng.integers(0, 2 * n)))
    exists = any(is_consistent(q, m) for m in bipartitions(n))
    result = find_consistent_partition(q, n)
    if exists:
        assert not isinstance(result, Infeasible)
        assert is_consistent(q, result)
        assert result[0] and not result.all()
    else:
        assert isinstance(result, Infeasible)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_low_violation_partition_exact_for_small_graphs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    q = random_constraints(rng, n, int(rng.integers(0, 2 * n)), fractional=rng.random() < 0.5)
    mask, violated = find_low_violation_partition(q, n)
    assert 0 < mask.sum() < n
    assert violated == pytest.approx(violated_count(q, mask))
    assert violated == pytest.approx(min(violated_count(q, m) for m in bipartitions(n)))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_low_violation_partition_heuristic_keeps_must_links(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(17, 40))
    q = random_constraints(rng, n, int(rng.integers(0, 2 * n)))
    mask, violated = find_low_violation_partition(q, n)
    if mask is None:
        return
    assert violations_must(q, mask) == 0
    assert 0 < mask.sum() < n
    assert violated == pytest.approx(violated_count(q, mask))
    if not isinstance(find_consistent_partition(q, n), Infeasible):
        assert violated == 0


# file format


def test_constraint_file_round_trip(tmp_path):
    q = ConstraintSet(must=[(0, 1), (2, 5, 0.25)], cannot=[(1, 4), (3, 5, 0.5)], n=6)
    path = tmp_path / "q.txt"
    write_constraints(q, path)
    assert read_constraints(path, n=6) == q


@pytest.mark.parametrize(
    "text, line",
    [
        ("ML 0 1\nXX 1 2\n", 2),
        ("ML 0 1\nCL 1 2 1.5\n", 2),
        ("CL 0 0\n", 1),
        ("ML 0 1\nCL 1 0\n", 2),
        ("ML 0 9\n", 1),
        ("ML 0 1 0.5 7\n", 1),
    ],
)
def test_constraint_file_errors_carry_line_number(tmp_path, text, line):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(ValueError, match=f":{line}:"):
        read_constraints(path, n=4)


def test_constraint_file_comments_and_blank_lines(tmp_path):
    path = tmp_path / "q.txt"
    path.write_text("# header\n\nml 0 1\nCL 1 2 0.5\n")
    q = read_constraints(path)
    assert q.must == {(0, 1): 1.0}
    assert q.cannot == {(1, 2): 0.5}
