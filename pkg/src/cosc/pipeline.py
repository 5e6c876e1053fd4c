"""
Constrained bipartitioning with a γ schedule, and recursive k-way splitting.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constraints import (
    ConstraintSet,
    Infeasible,
    find_consistent_partition,
    find_low_violation_partition,
    is_consistent,
    violated_count,
    violations_cannot,
    violations_must,
)
from .functional import f_gamma_set, optimal_threshold
from .graph import balance, merge_must_links, ncut
from .inner_solver import ratio_dca

__all__ = [
    "ConstraintInfeasibleError",
    "CoscConfig",
    "BipartitionReport",
    "MultiReport",
    "gamma_for_violations",
    "cosc_bipartition",
    "multicut_value",
    "violation_budget",
    "multi_partition",
    "canonical_labels",
]

logger = logging.getLogger(__name__)

_SLACK = 1e-9


class ConstraintInfeasibleError(ValueError):
    """Hard-mode constraints admit no consistent non-trivial bipartition."""


@dataclass
class CoscConfig:
    """Run configuration.

    ``mode`` is ``"hard"`` (all constraints satisfied) or ``"soft"`` (at most
    ``max_violations`` violated).  The γ schedule starts at 0, jumps to
    ``gamma_initial_fraction`` of the cap and then grows by ``gamma_growth``.
    ``merge_must_links=None`` merges unless the run is soft with fractional
    must-link weights.
    """

    mode: str = "hard"
    max_violations: int = 0
    restarts: int = 10
    merge_must_links: bool | None = None
    gamma_growth: float = 2.0
    gamma_initial_fraction: float = 0.05
    max_gamma_steps: int = 40
    seed: int | None = 0
    eps: float = 1e-6
    inner_tol: float = 1e-8
    inner_max_iter: int = 5000
    max_outer: int = 200

    def __post_init__(self):
        if self.mode not in ("hard", "soft"):
            raise ValueError(f"mode must be 'hard' or 'soft', got {self.mode!r}")
        if self.max_violations < 0:
            raise ValueError("max_violations must be >= 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.gamma_growth <= 1:
            raise ValueError("gamma_growth must exceed 1")

    @property
    def budget(self):
        return 0 if self.mode == "hard" else self.max_violations


@dataclass
class BipartitionReport:
    gamma_final: float = 0.0
    value: float = float("nan")
    ncut: float = float("nan")
    violations_must: float = 0.0
    violations_cannot: float = 0.0
    violated: float = 0.0
    gamma_cap: float | None = None
    reduced_n: int = 0
    restart_histories: list = field(default_factory=list)
    schedule: list = field(default_factory=list)


@dataclass
class MultiReport:
    multicut: float = float("nan")
    violations_must: float = 0.0
    violations_cannot: float = 0.0
    violated: float = 0.0
    gamma_final: float = 0.0
    levels: list = field(default_factory=list)


def gamma_for_violations(lam, gvol_V, l):
    """Smallest γ for which minimizers of ``F̂_γ`` violate at most ``l`` constraints."""
    return gvol_V * lam / (4.0 * (l + 1))


def _unit(f):
    return f / np.linalg.norm(f)


def _gamma_cap(g, q, ref, ref_violated, l):
    """γ above which every minimizer of ``F̂_γ`` violates at most ``l`` constraints.

    For a consistent reference this is ``gvol(V) NCut(ref) / (4(l+1))``.  A
    reference violating ``v <= l`` constraints still bounds the minimum,
    giving ``NCut(ref) / (4(l+1)/gvol(V) - 2v/bal(ref))`` when positive.
    """
    if ref is None or ref_violated > l + _SLACK:
        return None
    gv = g.total_volume
    lam = ncut(g, ref)
    if ref_violated <= _SLACK:
        return gamma_for_violations(lam, gv, l)
    denom = 4.0 * (l + 1) / gv - 2.0 * ref_violated / balance(g, ref)
    return lam / denom if denom > 0 else None


def _reference_partition(q, n):
    ref = find_consistent_partition(q, n)
    if not isinstance(ref, Infeasible):
        return ref, 0.0
    return find_low_violation_partition(q, n)


def _solve(g, q, gamma, f0, cfg):
    run = ratio_dca(
        g, q, gamma, f0, eps=cfg.eps, tol=cfg.inner_tol, max_iter=cfg.inner_max_iter, max_outer=cfg.max_outer
    )
    mask, value = optimal_threshold(g, q, run.f, gamma)
    return mask, value, run


def _schedule(g, q, l, cfg, start, start_f, start_value, ref, cap):
    """Grow γ from 0 until the partition is within the violation budget.

    Every γ step is warm-started from the previous partition's indicator and
    from the previous continuous iterate; at the cap a run seeded with the
    reference partition is added.
    """
    current, current_f, gamma = start, start_f, 0.0
    violated = violated_count(q, current)
    schedule = [(0.0, start_value, violated)]
    if cap is None:
        base = gamma_for_violations(ncut(g, current), g.total_volume, l)
    steps = 0
    while violated > l + _SLACK:
        steps += 1
        if cap is not None:
            gamma = min(max(gamma * cfg.gamma_growth, cfg.gamma_initial_fraction * cap), cap)
            at_cap = gamma >= cap
        else:
            if steps > cfg.max_gamma_steps:
                logger.warning("γ schedule exhausted with %g violations (budget %d)", violated, l)
                break
            gamma = max(gamma * cfg.gamma_growth, cfg.gamma_initial_fraction * base)
            at_cap = False
        candidates = [(current, current_f)]
        seeds = [current.astype(float), current_f]
        if at_cap and ref is not None:
            candidates.append((ref, ref.astype(float)))
            seeds.append(ref.astype(float))
        for seed in seeds:
            mask, _, run = _solve(g, q, gamma, seed, cfg)
            candidates.append((mask, run.f))
        values = [f_gamma_set(g, q, m, gamma) for m, _ in candidates]
        pick = int(np.argmin(values))
        current, current_f = candidates[pick]
        violated = violated_count(q, current)
        schedule.append((gamma, values[pick], violated))
        if at_cap:
            break
    return current, gamma, schedule


def _bipartition_reduced(g, q, l, cfg, rng, report):
    ref, ref_violated = _reference_partition(q, g.n)
    if ref is not None and ref_violated > l + _SLACK:
        # The budget is out of reach of the reference; aim for what it attains.
        logger.info("budget %d raised to the reference's %g violations", l, ref_violated)
        l = ref_violated
    cap = _gamma_cap(g, q, ref, ref_violated, l)
    report.gamma_cap = cap

    starts = [_unit(rng.standard_normal(g.n)) for _ in range(cfg.restarts - 1)]
    starts.append(ref.astype(float) if ref is not None else _unit(rng.standard_normal(g.n)))
    best = None
    for f0 in starts:
        if f0.max() - f0.min() <= 0:
            continue
        mask, value, run = _solve(g, q, 0.0, f0, cfg)
        report.restart_histories.append(run.history)
        current, gamma, schedule = _schedule(g, q, l, cfg, mask, run.f, value, ref, cap)
        violated = violated_count(q, current)
        # Within budget first, then the cut criterion.
        key = (violated > l + _SLACK, f_gamma_set(g, q, current, 0.0) if violated <= l + _SLACK else violated)
        if best is None or key < best[0]:
            best = (key, current, gamma, schedule)
    _, current, gamma, schedule = best
    report.schedule = schedule
    report.gamma_final = gamma
    report.value = f_gamma_set(g, q, current, gamma)
    return current


def _merge_default(q, cfg):
    if cfg.merge_must_links is not None:
        return cfg.merge_must_links
    if cfg.mode == "hard":
        return True
    return all(w >= 1.0 for w in q.must.values())


def cosc_bipartition(g, q, cfg=None, rng=None):
    """Constrained bipartition of ``g``.

    Minimizes ``F_γ`` at γ = 0 from ``cfg.restarts`` starting points, then
    increases γ, warm-starting from the previous partition, until at most
    the allowed number of constraints is violated.  The schedule is capped
    at the γ from which every minimizer of ``F̂_γ`` respects the budget, and
    at the cap a run seeded with a reference partition guarantees the
    budget is met.

    Returns
    -------
    mask : ndarray of bool
        Membership of the side containing vertex 0.
    report : BipartitionReport

    Raises
    ------
    ConstraintInfeasibleError
        In hard mode when no consistent non-trivial bipartition exists.
    """
    cfg = cfg or CoscConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    if g.n < 2:
        raise ValueError("cannot bipartition a graph with fewer than two vertices")
    hard = cfg.mode == "hard"
    if hard:
        seed = find_consistent_partition(q, g.n)
        if isinstance(seed, Infeasible):
            raise ConstraintInfeasibleError(f"constraints are infeasible: {seed.reason}")

    report = BipartitionReport()
    gr, vmap, qr, lost_count = g, np.arange(g.n), q, 0.0
    if _merge_default(q, cfg) and q.must:
        merged, mmap = merge_must_links(g, list(q.must))
        mq, lost = q.map_vertices(mmap, n=merged.n)
        # Soft mode may prefer violating a must-link, so only merge when
        # that forfeits nothing.
        if hard or (merged.n >= 2 and not lost):
            gr, vmap, lost_count = merged, mmap, sum(lost.values())
            qr = ConstraintSet(cannot=mq.cannot, n=merged.n)
        if gr.n < 2:
            raise ValueError("must-links merge the whole graph into one vertex")
    report.reduced_n = gr.n

    l = cfg.budget
    budget = max(l - lost_count, 0)
    mask_r = _bipartition_reduced(gr, qr, budget, cfg, rng, report)
    mask = mask_r[vmap]
    if not mask[0]:
        mask = ~mask

    report.ncut = ncut(g, mask)
    report.violations_must = violations_must(q, mask)
    report.violations_cannot = violations_cannot(q, mask)
    report.violated = violated_count(q, mask)
    if hard and not is_consistent(q, mask):
        raise RuntimeError("hard-mode result violates constraints")
    return mask, report


def canonical_labels(labels):
    """Relabel classes in order of first appearance (vertex 0 gets label 0)."""
    labels = np.asarray(labels)
    mapping = {}
    out = np.empty(labels.size, dtype=np.int64)
    for i, c in enumerate(labels.tolist()):
        out[i] = mapping.setdefault(c, len(mapping))
    return out


def multicut_value(g, labels):
    """``Σ_i NCut(C_i, C̄_i)`` over the classes of ``labels``."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (g.n,):
        raise ValueError("labels must have one entry per vertex")
    k = int(labels.max()) + 1
    if k < 2 or labels.min() < 0:
        raise ValueError("need at least two classes labelled 0..k-1")
    counts = np.bincount(labels, minlength=k)
    if np.any(counts == 0):
        raise ValueError("every class must be non-empty")
    return float(sum(ncut(g, labels == c) for c in range(k)))


def violation_budget(N, k_est):
    """Expected cannot-link violations of a binary split under the uniform class model."""
    if N < 0 or k_est < 2:
        raise ValueError("need N >= 0 and k_est >= 2")
    return max(0, math.floor((k_est - 2) * N / k_est + 1e-12))


def _labels_from(components, n):
    labels = np.empty(n, dtype=np.int64)
    for c, comp in enumerate(components):
        labels[comp] = c
    return labels


def _internal_cannot(q, components, n):
    """Number of cannot-link pairs inside each component."""
    labels = _labels_from(components, n)
    counts = np.zeros(len(components), dtype=np.int64)
    for i, j in q.cannot:
        if labels[i] == labels[j]:
            counts[labels[i]] += 1
    return counts


def _split_disconnected(sub, qs, hard, cfg, rng):
    """Split of a disconnected component.

    Soft: detach the largest connected piece (zero cut).  Hard: color whole
    pieces consistently when possible (zero cut); otherwise split the
    largest piece consistently and attach every other piece to a side on
    which it violates nothing.
    """
    pieces = sub.components()
    largest = np.argmax(np.bincount(pieces))
    if not hard or not qs.cannot:
        return pieces == largest
    order = np.argsort(pieces, kind="stable")
    same = pieces[order[:-1]] == pieces[order[1:]]
    chain = list(zip(order[:-1][same].tolist(), order[1:][same].tolist()))
    mask = find_consistent_partition(ConstraintSet(chain, list(qs.cannot), n=sub.n), sub.n)
    if not isinstance(mask, Infeasible):
        return mask
    main = np.flatnonzero(pieces == largest)
    qm = qs.restrict(main)
    if main.size < 2 or isinstance(find_consistent_partition(qm, main.size), Infeasible):
        return None
    main_mask, _ = cosc_bipartition(sub.subgraph(main), qm, replace(cfg, mode="hard"), rng=rng)
    mask = np.zeros(sub.n, dtype=bool)
    mask[main[main_mask]] = True
    placed = np.zeros(sub.n, dtype=bool)
    placed[main] = True
    for p in np.unique(pieces):
        if p == largest:
            continue
        members = np.flatnonzero(pieces == p)
        placed[members] = True
        options = []
        for side in (True, False):
            trial = mask.copy()
            trial[members] = side
            if is_consistent(qs.restrict(np.flatnonzero(placed)), trial[placed]):
                options.append((ncut(sub, trial) if trial.any() and not trial.all() else np.inf, side))
        if not options:
            return None
        mask[members] = min(options)[1]
    return mask


def _best_move(g, mask, candidates, target):
    best = None
    for v in candidates:
        trial = mask.copy()
        trial[v] = target
        value = ncut(g, trial)
        if best is None or value < best[0]:
            best = (value, v)
    return best[1]


def _confine_violations(g, q, mask):
    """Move vertices so that all violated cannot-links lie on one side.

    The side with more violated pairs (the dirty side) keeps them and is
    split again later.  Endpoints of violated pairs on the other side are
    moved across, and so are dirty-side vertices on an odd cycle of
    cannot-links that have no cannot-link partner on the clean side, since
    an odd cycle could not be split consistently.  Each move is the
    candidate that raises NCut least.
    """
    mask = mask.copy()
    pairs = list(q.cannot)
    inside = [(i, j) for i, j in pairs if mask[i] == mask[j]]
    on_true = sum(1 for i, _ in inside if mask[i])
    dirty = on_true >= len(inside) - on_true
    while (mask != dirty).sum() > 1:
        bad = [(i, j) for i, j in pairs if mask[i] == mask[j] and mask[i] != dirty]
        if not bad:
            break
        mask[_best_move(g, mask, {v for pair in bad for v in pair}, dirty)] = dirty
    while (mask == dirty).sum() > 2:
        side = np.flatnonzero(mask == dirty)
        qd = q.restrict(side)
        if not isinstance(find_consistent_partition(qd, side.size), Infeasible):
            break
        coloring, _ = find_low_violation_partition(qd, side.size)
        if coloring is None:
            break
        odd = {side[v] for i, j in qd.cannot if coloring[i] == coloring[j] for v in (i, j)}
        free = [v for v in odd if all(mask[u] == dirty for pair in pairs if v in pair for u in pair)]
        if not free:
            break
        mask[_best_move(g, mask, free, not dirty)] = not dirty
    return mask


def _split_component(g, q, comp, k, sizes, n_total, cfg, rng, hard=False, confine=False):
    """Candidate split of one component, as a mask over ``comp``, or ``None``.

    ``hard`` splits with no violated constraint inside the component;
    ``confine`` keeps all violated cannot-links on one side.
    """
    if comp.size < 2:
        return None, None
    sub = g.subgraph(comp, check_connected=False)
    qs = q.restrict(comp)
    n_cl = int(round(sum(qs.cannot.values())))
    k_est = max(2, (k * int(sizes[comp].sum())) // n_total)
    budget = 0 if hard else violation_budget(n_cl, k_est)
    info = {"size": int(sizes[comp].sum()), "cannot": n_cl, "k_est": k_est, "budget": budget, "hard": hard}
    if not sub.is_connected():
        info["disconnected"] = True
        return _split_disconnected(sub, qs, hard, replace(cfg, merge_must_links=False), rng), info
    if hard:
        if isinstance(find_consistent_partition(qs, sub.n), Infeasible):
            return None, info
        sub_cfg = replace(cfg, mode="hard", merge_must_links=False)
    else:
        sub_cfg = replace(cfg, mode="soft", max_violations=budget, merge_must_links=False)
    mask, report = cosc_bipartition(sub, qs, sub_cfg, rng=rng)
    if confine:
        mask = _confine_violations(sub, qs, mask)
        if not mask[0]:
            mask = ~mask
    info["gamma_final"] = report.gamma_final
    info["violated"] = violated_count(qs, mask)
    return mask, info


def multi_partition(g, q, k, cfg=None):
    """Recursive constrained k-way partitioning.

    Must-links are merged once.  At every level each current component is
    split by a soft-constrained bipartition whose violation budget follows
    the uniform class model, and the split giving the smallest multicut is
    committed.  With ``cfg.mode == "hard"`` the split before the last one
    gathers its violated cannot-links on one side, and the final split is
    restricted to splits after which no cannot-link is violated, when one
    exists.

    Returns
    -------
    labels : ndarray of int
        Class per vertex, ``0..k-1``, numbered by first appearance.
    report : MultiReport
    """
    cfg = cfg or CoscConfig()
    if k < 2:
        raise ValueError("k must be at least 2")
    if not g.is_connected():
        raise ValueError("graph is not connected")
    rng = np.random.default_rng(cfg.seed)

    if q.must:
        gr, vmap = merge_must_links(g, list(q.must))
    else:
        gr, vmap = g, np.arange(g.n)
    qr, lost = q.map_vertices(vmap, n=gr.n)
    qr = ConstraintSet(cannot=qr.cannot, n=gr.n)
    if lost:
        logger.warning("%d cannot-link pairs lie inside must-link components", len(lost))
    sizes = np.bincount(vmap, minlength=gr.n)

    components = [np.arange(gr.n)]
    cache = {}
    report = MultiReport()
    while len(components) < k:
        # In hard mode the last split must leave no cannot-link inside any
        # component: only a component holding all remaining internal
        # cannot-links may be split, and that split is itself hard.
        final_hard = cfg.mode == "hard" and len(components) == k - 1
        # One split earlier, violations are gathered into a single component.
        confine = cfg.mode == "hard" and len(components) == k - 2
        options = []
        for hard in [True, False] if final_hard else [False]:
            dirty = _internal_cannot(qr, components, gr.n)
            for idx, comp in enumerate(components):
                if hard and dirty.sum() > dirty[idx]:
                    continue
                key = (tuple(comp.tolist()), hard, confine)
                if key not in cache:
                    cache[key] = _split_component(
                        gr, qr, comp, k, sizes, g.n, cfg, rng, hard=hard, confine=confine
                    )
                mask, info = cache[key]
                if mask is None:
                    continue
                parts = components[:idx] + [comp[mask], comp[~mask]] + components[idx + 1 :]
                value = multicut_value(gr, _labels_from(parts, gr.n))
                options.append((value, idx, parts, info))
            if options:
                break
            if hard:
                logger.warning("no split satisfies all cannot-links; using the soft budget")
        if not options:
            raise ValueError(f"no splittable component left after {len(components)} clusters")
        value, idx, parts, info = min(options, key=lambda o: (o[0], o[1]))
        components = parts
        report.levels.append(
            {"clusters": len(components), "multicut": value, "split": idx, "candidates": [o[0] for o in options], **info}
        )
        report.gamma_final = max(report.gamma_final, info.get("gamma_final", 0.0))

    labels = canonical_labels(_labels_from(components, gr.n)[vmap])
    report.multicut = multicut_value(g, labels)
    must_viol = sum(w for (i, j), w in q.must.items() if labels[i] != labels[j])
    cannot_viol = sum(w for (i, j), w in q.cannot.items() if labels[i] == labels[j])
    report.violations_must = 2.0 * must_viol
    report.violations_cannot = 2.0 * cannot_viol
    report.violated = must_viol + cannot_viol
    return labels, report
