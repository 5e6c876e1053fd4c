"""Command-line interface: ``cosc cluster | knn-graph | gen-constraints | eval | sweep``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from .constraints import ConstraintSet, read_constraints, write_constraints
from .graph import knn_graph, read_graph, write_graph
from .pipeline import (
    ConstraintInfeasibleError,
    CoscConfig,
    canonical_labels,
    cosc_bipartition,
    multi_partition,
)

__all__ = [
    "RunMetrics",
    "clustering_error",
    "generate_constraints",
    "count_violated",
    "read_labels",
    "write_labels",
    "run_clustering",
    "main",
]

logger = logging.getLogger("cosc")

SWEEP_COLUMNS = ["n_constraints", "trial", "ncut", "fraction_violated", "error", "gamma_final"]


@dataclass
class RunMetrics:
    ncut: float
    violations_must: float
    violations_cannot: float
    fraction_violated: float
    clustering_error: float | None
    gamma_final: float
    wall_time_ms: int
    k: int = 2


def clustering_error(pred, truth):
    """Majority-vote error: each predicted cluster takes its most frequent true label."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError("prediction and ground truth have different lengths")
    if pred.size == 0:
        return 0.0
    wrong = 0
    for c in np.unique(pred):
        members = truth[pred == c]
        values, counts = np.unique(members, return_counts=True)
        # np.unique sorts, so argmax picks the smallest label among ties.
        wrong += members.size - counts[np.argmax(counts)]
    return wrong / pred.size


def generate_constraints(truth, count, seed=None):
    """Sample ``count`` distinct pairs; equal labels give must-links, different give cannot-links."""
    truth = np.asarray(truth)
    n = truth.size
    if n < 2:
        raise ValueError("need at least two points")
    total = n * (n - 1) // 2
    if count < 0 or count > total:
        raise ValueError(f"count must be between 0 and {total}")
    rng = np.random.default_rng(seed)
    if count > total // 2:
        iu, ju = np.triu_indices(n, k=1)
        pick = np.sort(rng.choice(total, size=count, replace=False))
        pairs = list(zip(iu[pick].tolist(), ju[pick].tolist()))
    else:
        seen, pairs = set(), []
        while len(pairs) < count:
            i, j = rng.integers(0, n, size=2).tolist()
            if i == j:
                continue
            key = (min(i, j), max(i, j))
            if key not in seen:
                seen.add(key)
                pairs.append(key)
    must = [(i, j) for i, j in pairs if truth[i] == truth[j]]
    cannot = [(i, j) for i, j in pairs if truth[i] != truth[j]]
    return ConstraintSet(must, cannot, n=n)


def count_violated(q, labels):
    """Number of violated constraint pairs under a labelling."""
    labels = np.asarray(labels)
    must = sum(1 for i, j in q.must if labels[i] != labels[j])
    cannot = sum(1 for i, j in q.cannot if labels[i] == labels[j])
    return must, cannot


def read_labels(path):
    labels = []
    with open(path) as fh:
        for no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                labels.append(int(text))
            except ValueError:
                raise ValueError(f"{path}:{no}: expected an integer label") from None
    return np.array(labels, dtype=np.int64)


def write_labels(labels, path):
    with open(path, "w") as fh:
        fh.writelines(f"{int(c)}\n" for c in labels)


def read_points(path):
    try:
        X = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return X


def run_clustering(g, q, k=2, cfg=None, truth=None):
    """Cluster and collect metrics.  Returns ``(labels, RunMetrics)``."""
    cfg = cfg or CoscConfig()
    start = time.perf_counter()
    if k == 2:
        mask, report = cosc_bipartition(g, q, cfg)
        labels = np.where(mask, 0, 1)
        value = report.ncut
    else:
        labels, report = multi_partition(g, q, k, cfg)
        value = report.multicut
    elapsed = int(round(1000 * (time.perf_counter() - start)))
    labels = canonical_labels(labels)
    must, cannot = count_violated(q, labels)
    total = q.num_constraints
    metrics = RunMetrics(
        ncut=float(value),
        violations_must=float(report.violations_must),
        violations_cannot=float(report.violations_cannot),
        fraction_violated=(must + cannot) / total if total else 0.0,
        clustering_error=None if truth is None else clustering_error(labels, truth),
        gamma_final=float(report.gamma_final),
        wall_time_ms=elapsed,
        k=k,
    )
    return labels, metrics


def _config(args):
    return CoscConfig(
        mode=getattr(args, "mode", "hard"),
        max_violations=getattr(args, "max_violations", 0),
        restarts=args.restarts,
        seed=args.seed,
    )


def cmd_cluster(args):
    g = read_graph(args.graph, vertex_weights=args.weights)
    q = read_constraints(args.constraints, n=g.n) if args.constraints else ConstraintSet(n=g.n)
    truth = read_labels(args.truth) if args.truth else None
    try:
        labels, metrics = run_clustering(g, q, args.k, _config(args), truth)
    except ConstraintInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_labels(labels, args.out_labels)
    doc = asdict(metrics)
    if args.k > 2:
        doc["multicut"] = doc.pop("ncut")
    if doc["clustering_error"] is None:
        doc.pop("clustering_error")
    with open(args.out_metrics, "w") as fh:
        json.dump(doc, fh, indent=2)
    if args.mode == "hard" and metrics.fraction_violated > 0:
        print("error: hard-mode result violates constraints", file=sys.stderr)
        return 1
    return 0


def cmd_knn_graph(args):
    g = knn_graph(read_points(args.points), args.k, vertex_weights=args.weights)
    write_graph(g, args.out)
    return 0


def cmd_gen_constraints(args):
    q = generate_constraints(read_labels(args.labels), args.count, args.seed)
    write_constraints(q, args.out)
    return 0


def cmd_eval(args):
    err = clustering_error(read_labels(args.pred), read_labels(args.truth))
    print(json.dumps({"clustering_error": err}))
    return 0


def cmd_sweep(args):
    truth = read_labels(args.labels)
    g = read_graph(args.graph, vertex_weights=args.weights)
    if truth.size != g.n:
        raise ValueError("labels file length does not match the graph")
    k = args.k or int(np.unique(truth).size)
    counts = [int(c) for c in args.counts.split(",") if c.strip()]
    rows = []
    for ci, count in enumerate(counts):
        for trial in range(args.trials):
            seq = np.random.SeedSequence([args.seed, ci, trial])
            c_seed, r_seed = (int(s.generate_state(1)[0]) for s in seq.spawn(2))
            q = generate_constraints(truth, count, c_seed)
            cfg = CoscConfig(restarts=args.restarts, seed=r_seed)
            _, m = run_clustering(g, q, k, cfg, truth)
            rows.append([count, trial, m.ncut, m.fraction_violated, m.clustering_error, m.gamma_final])
            logger.info("count=%d trial=%d ncut=%.4f error=%.4f", count, trial, m.ncut, m.clustering_error)
    with open(args.out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        writer.writerows(rows)
    table = np.array([r[2:] for r in rows], dtype=float).reshape(len(counts), args.trials, 4)
    for count, mean in zip(counts, table.mean(axis=1)):
        print(f"{count}\tncut={mean[0]:.4f}\tfraction_violated={mean[1]:.4f}\terror={mean[2]:.4f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="cosc", description="Constrained 1-spectral clustering")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="cluster a graph under pairwise constraints")
    p.add_argument("--graph", required=True)
    p.add_argument("--constraints")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--mode", choices=["hard", "soft"], default="hard")
    p.add_argument("--max-violations", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", choices=["ratio", "normalized"], default="ratio")
    p.add_argument("--truth", help="ground-truth labels for the clustering error")
    p.add_argument("--out-labels", required=True)
    p.add_argument("--out-metrics", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("knn-graph", help="build a k-NN similarity graph from CSV points")
    p.add_argument("--points", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--weights", choices=["ratio", "normalized"], default="ratio")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_knn_graph)

    p = sub.add_parser("gen-constraints", help="sample label-derived constraints")
    p.add_argument("--labels", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_constraints)

    p = sub.add_parser("eval", help="majority-vote clustering error")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="error / cut / violations versus number of constraints")
    p.add_argument("--graph", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--counts", required=True, help="comma-separated constraint counts")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--weights", choices=["ratio", "normalized"], default="ratio")
    p.add_argument("--out-csv", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
