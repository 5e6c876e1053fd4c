"""Constrained 1-spectral clustering.

Bipartitions a weighted graph by minimizing the normalized cut subject to
must-link and cannot-link constraints, through an exact continuous
relaxation solved by a ratio descent scheme with an accelerated dual inner
solver.  Recursive splitting gives k-way partitions.
"""

from .constraints import (
    ConstraintSet,
    Infeasible,
    find_consistent_partition,
    is_consistent,
    read_constraints,
    violated_count,
    write_constraints,
)
from .functional import f_gamma_cont, f_gamma_set, optimal_threshold
from .graph import Graph, balance, cut, gvol, knn_graph, merge_must_links, ncut, read_graph, write_graph
from .inner_solver import ratio_dca, simplex_project, solve_inner
from .pipeline import (
    ConstraintInfeasibleError,
    CoscConfig,
    cosc_bipartition,
    gamma_for_violations,
    multi_partition,
    multicut_value,
    violation_budget,
)

__all__ = [
    "Graph",
    "cut",
    "gvol",
    "balance",
    "ncut",
    "knn_graph",
    "merge_must_links",
    "read_graph",
    "write_graph",
    "ConstraintSet",
    "Infeasible",
    "find_consistent_partition",
    "is_consistent",
    "violated_count",
    "read_constraints",
    "write_constraints",
    "f_gamma_set",
    "f_gamma_cont",
    "optimal_threshold",
    "simplex_project",
    "solve_inner",
    "ratio_dca",
    "ConstraintInfeasibleError",
    "CoscConfig",
    "cosc_bipartition",
    "gamma_for_violations",
    "multi_partition",
    "multicut_value",
    "violation_budget",
]

__version__ = "0.1.0"
