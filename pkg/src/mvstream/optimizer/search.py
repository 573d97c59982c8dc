"""Exact representation-set selection.

Users only couple through the stored set and the shared storage row, and
every user type watches a single video. The search therefore runs one
branch-and-bound per video over "store / do not store" decisions, keeping
the whole storage/value Pareto frontier, and then merges the per-video
frontiers under the global storage budget (a multiple-choice knapsack).
"""

from __future__ import annotations

import bisect
import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..client import InstanceTooLarge
from ..model import (Representation, RepresentationSet, VideoModel, coding_distortion,
                     storage_cost)
from ..population import UserClass
from .evaluate import CandidateLadder, VideoObjective, expected_satisfaction, user_types

log = logging.getLogger(__name__)

EPS = 1e-12
DEFAULT_NODE_LIMIT = 10_000_000


@dataclass
class OptimizationReport:
    chosen: RepresentationSet
    objective: float
    storage_budget: float
    per_video: dict[str, float] = field(default_factory=dict)  # conditional mean satisfaction
    chains: dict = field(default_factory=dict)
    nodes: int = 0
    runtime: float = 0.0
    optimal: bool = True
    gap: float = 0.0
    bound_trace: list = field(default_factory=list)
    method: str = "optimized"

    @property
    def storage(self) -> float:
        return self.chosen.storage_cost


@dataclass
class Frontier:
    """Storage/value Pareto points of one video, storage ascending, value increasing."""

    storages: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    sets: list[tuple[Representation, ...]] = field(default_factory=list)
    abandoned_bound: float = float("-inf")
    nodes: int = 0

    def best_at(self, storage: float) -> float:
        k = bisect.bisect_right(self.storages, storage + 1e-9)
        return self.values[k - 1] if k else float("-inf")

    def best_many(self, storages: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self.storages, storages + 1e-9, side="right")
        vals = np.asarray(self.values)
        return np.where(k > 0, vals[np.maximum(k - 1, 0)], -np.inf)

    def add(self, storage: float, value: float, reps: tuple[Representation, ...]) -> None:
        if value <= self.best_at(storage) + EPS:
            return
        k = bisect.bisect_left(self.storages, storage)
        # drop points this one dominates
        j = k
        while j < len(self.storages) and self.values[j] <= value + EPS:
            j += 1
        del self.storages[k:j], self.values[k:j], self.sets[k:j]
        self.storages.insert(k, storage)
        self.values.insert(k, value)
        self.sets.insert(k, reps)

    def points(self):
        return list(zip(self.storages, self.values, self.sets))


class _NodeLimit(Exception):
    pass


class VideoSearch:
    """Branch-and-bound over the stored subset of one video's candidates."""

    def __init__(self, video: VideoModel, candidates: Sequence[Representation],
                 objective: VideoObjective, storage_cap: float):
        self.video = video
        self.candidates = sorted(candidates, key=Representation.key)
        self.objective = objective
        self.cap = storage_cap
        self.trace: list | None = None
        objective.prepare(self.candidates)

    def _add_cost(self, r: Representation, views: set[int]) -> float:
        return r.rate + (0.0 if r.view in views else self.video.depth_overhead)

    def run(self, node_budget: int, trace: bool = False) -> Frontier:
        front = Frontier()
        self.trace = [] if trace else None
        front.add(0.0, 0.0, ())
        self._nodes_left = node_budget
        self._front = front
        self._root_ub = None
        try:
            self._visit([], 0.0, set(), 0.0, list(self.candidates))
        except _NodeLimit:
            pass
        return front

    def _visit(self, inc: list, storage: float, views: set[int], value: float,
               undecided: list) -> None:
        front = self._front
        if self._nodes_left <= 0:
            # every open subtree lies under the root, whose bound covers them
            root = self._root_ub if self._root_ub is not None else self.objective.weight
            front.abandoned_bound = max(front.abandoned_bound, root)
            raise _NodeLimit
        self._nodes_left -= 1
        front.nodes += 1
        front.add(storage, value, tuple(inc))
        slack = self.cap - storage
        undecided = [r for r in undecided if self._add_cost(r, views) <= slack + 1e-9]
        if not undecided:
            return
        prof = self.objective.bound(inc, undecided, slack, views)
        if self._root_ub is None:
            self._root_ub = prof.top
        if self.trace is not None:
            self.trace.append((tuple(inc), tuple(undecided), prof.top))
        # the subtree can only matter at an added storage x where its bound
        # beats the frontier; branch where the excess is largest
        if not len(prof.levels):
            return
        excess = prof.values - front.best_many(storage + prof.levels)
        k = int(np.argmax(excess))
        if excess[k] <= EPS:
            return
        scores = prof.scores(float(prof.levels[k]))
        if not scores:
            return
        # branch on the undecided rep most used by the relaxed optimum
        x = max(sorted(scores, key=Representation.key),
                key=lambda r: (round(scores[r], 12), -r.rate))
        rest = [r for r in undecided if r != x]
        new_views = views | {x.view}
        new_inc = inc + [x]
        new_storage = storage + self._add_cost(x, views)
        self._visit(new_inc, new_storage, new_views, self.objective.value(new_inc), rest)
        self._visit(inc, storage, views, value, rest)


def prune_outer_views(video: VideoModel, reps: Sequence[Representation],
                      windows: Iterable) -> list[Representation]:
    """Drop anchors farther out than the outermost cameras any window needs.

    A camera left of every window is never better than a closer camera at or
    left of every window at the same rate, provided synthesis distortion
    falls as anchors move closer (every coding distortion at most the
    inpainting level) and storage does not depend on which view is stored.
    """
    windows = list(windows)
    if not windows or video.depth_overhead > 0:
        return list(reps)
    if any(coding_distortion(video, r.rate) > video.d_inpaint for r in reps):
        return list(reps)
    groups: dict[tuple, list[Representation]] = {}
    for r in reps:
        groups.setdefault((r.resolution, r.rate), []).append(r)
    keep = []
    for group in groups.values():
        # cuts come from candidate views of the same rate, which dominate farther ones
        cams = sorted({r.view for r in group})
        lefts, rights = [], []
        for w in windows:
            # a one-point window closed on a camera pairs it with an anchor to its left
            lefts.append(max((c for c in cams if c < w.lo or (c == w.lo and w.lo < w.hi)),
                             default=None))
            # a window ending on a camera may still synthesize that end from beyond it
            rights.append(min((c for c in cams if c > w.hi), default=None))
        left = None if None in lefts else min(lefts)
        right = None if None in rights else max(rights)
        keep += [r for r in group
                 if (left is None or r.view >= left) and (right is None or r.view <= right)]
    return sorted(keep, key=Representation.key)


def _run_search(search: VideoSearch, nodes: int, trace: bool):
    fr = search.run(nodes, trace=trace)
    return fr, search.trace


def video_frontiers(candidates: Sequence[Representation], population: Sequence[UserClass],
                    videos: Mapping[str, VideoModel], storage_cap: float,
                    node_limit: int = DEFAULT_NODE_LIMIT, trace: bool = False,
                    workers: int = 1
                    ) -> tuple[dict[str, Frontier], dict[str, VideoObjective], dict[str, list]]:
    """Storage/value frontier of every video up to ``storage_cap``.

    The node limit is split evenly across videos, so results do not depend
    on ``workers`` (number of processes searching videos in parallel).
    """
    types = user_types(population)
    by_video: dict[str, list[Representation]] = {}
    for r in candidates:
        by_video.setdefault(r.video, []).append(r)
    frontiers, objectives, traces = {}, {}, {}
    searches = {}
    for vid in sorted(by_video):
        vtypes = [t for t in types if t.video == vid]
        obj = VideoObjective(videos[vid], vtypes)
        objectives[vid] = obj
        if not vtypes:
            fr = Frontier()
            fr.add(0.0, 0.0, ())
            frontiers[vid] = fr
            continue
        cands = prune_outer_views(videos[vid], by_video[vid], (t.window for t in vtypes))
        searches[vid] = VideoSearch(videos[vid], cands, obj, storage_cap)
    per_video = max(node_limit // max(len(searches), 1), 1)
    if workers > 1 and len(searches) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(searches))) as pool:
            futures = {vid: pool.submit(_run_search, s, per_video, trace)
                       for vid, s in searches.items()}
            results = {vid: f.result() for vid, f in futures.items()}
    else:
        results = {vid: _run_search(s, per_video, trace) for vid, s in searches.items()}
    for vid, (fr, tr) in results.items():
        frontiers[vid] = fr
        traces[vid] = tr
    return dict(sorted(frontiers.items())), objectives, traces


def merge_frontiers(frontiers: Mapping[str, Frontier], budget: float
                    ) -> tuple[float, float, tuple[Representation, ...]]:
    """Best total value over one frontier point per video within ``budget``."""
    states = [(0.0, 0.0, ())]
    for vid in sorted(frontiers):
        fr = frontiers[vid]
        nxt = []
        for s, v, reps in states:
            for s2, v2, reps2 in fr.points():
                if s + s2 <= budget + 1e-9:
                    nxt.append((s + s2, v + v2, reps + reps2))
        # keep the storage/value Pareto set of partial allocations
        nxt.sort(key=lambda x: (x[0], -x[1], _lex(x[2])))
        states = []
        best = float("-inf")
        for st in nxt:
            if st[1] > best + EPS:
                states.append(st)
                best = st[1]
    v = max(x[1] for x in states)
    # cheapest among near-ties, then lexicographic
    ties = [x for x in states if x[1] >= v - EPS]
    s, v, reps = min(ties, key=lambda x: (x[0], _lex(x[2])))
    return v, s, reps


def _lex(reps) -> tuple:
    return tuple(sorted(r.key() for r in reps))


def optimize_set(catalog: CandidateLadder | Iterable[Representation],
                 population: Sequence[UserClass], storage_budget: float,
                 videos: Mapping[str, VideoModel], node_limit: int = DEFAULT_NODE_LIMIT,
                 trace: bool = False, workers: int = 1) -> OptimizationReport:
    """Maximize expected satisfaction subject to the total storage budget."""
    return optimize_sweep(catalog, population, [storage_budget], videos,
                          node_limit=node_limit, trace=trace, workers=workers)[0]


def optimize_sweep(catalog, population: Sequence[UserClass], budgets: Sequence[float],
                   videos: Mapping[str, VideoModel], node_limit: int = DEFAULT_NODE_LIMIT,
                   trace: bool = False, workers: int = 1) -> list[OptimizationReport]:
    """Exact optima for several storage budgets from one frontier computation."""
    t0 = time.perf_counter()
    candidates = _candidates(catalog, videos)
    cap = max(budgets) if budgets else 0.0
    frontiers, objectives, traces = video_frontiers(candidates, population, videos,
                                                    max(cap, 0.0), node_limit, trace,
                                                    workers)
    nodes = sum(f.nodes for f in frontiers.values())
    limited = any(f.abandoned_bound > float("-inf") for f in frontiers.values())
    elapsed = time.perf_counter() - t0
    reports = []
    for budget in budgets:
        if budget <= 0:
            reports.append(_report(frozenset(), 0.0, budget, population, videos, objectives,
                                   nodes, elapsed, limited, 0.0, traces))
            continue
        value, _, reps = merge_frontiers(frontiers, budget)
        gap = 0.0
        if limited:
            upper = sum(max(f.best_at(budget), f.abandoned_bound) for f in frontiers.values())
            gap = max(0.0, upper - value)
        reports.append(_report(frozenset(reps), value, budget, population, videos, objectives,
                               nodes, elapsed, not limited, gap, traces))
    return reports


def _report(reps, value, budget, population, videos, objectives, nodes, elapsed, optimal,
            gap, traces) -> OptimizationReport:
    chosen = RepresentationSet.build(reps, videos)
    chains: dict = {}
    per_video = {}
    for vid, obj in objectives.items():
        if obj.weight > 0:
            per_video[vid] = obj.value([r for r in reps if r.video == vid]) / obj.weight
    expected_satisfaction(chosen, population, videos, chains=chains)
    return OptimizationReport(chosen=chosen, objective=value, storage_budget=budget,
                              per_video=per_video, chains=chains, nodes=nodes,
                              runtime=elapsed, optimal=optimal, gap=gap,
                              bound_trace=traces if any(traces.values()) else [])


def _candidates(catalog, videos) -> list[Representation]:
    if isinstance(catalog, CandidateLadder):
        return catalog.candidates(videos)
    if isinstance(catalog, RepresentationSet):
        return sorted(catalog.reps, key=Representation.key)
    return sorted(set(catalog), key=Representation.key)


def brute_force_set_selection(catalog, population: Sequence[UserClass], storage_budget: float,
                              videos: Mapping[str, VideoModel], max_candidates: int = 18
                              ) -> OptimizationReport:
    """Enumerate every storage-feasible subset of the catalog.

    The objective is scored once per per-video subset and the products of
    per-video subsets are enumerated exhaustively (vectorized).
    """
    t0 = time.perf_counter()
    candidates = _candidates(catalog, videos)
    if len(candidates) > max_candidates:
        raise InstanceTooLarge(f"{len(candidates)} candidates > guard {max_candidates}")
    types = user_types(population)
    by_video: dict[str, list[Representation]] = {}
    for r in candidates:
        by_video.setdefault(r.video, []).append(r)
    tables = []
    objectives = {}
    for vid in sorted(by_video):
        obj = VideoObjective(videos[vid], [t for t in types if t.video == vid])
        objectives[vid] = obj
        rows = []
        reps = by_video[vid]
        for k in range(len(reps) + 1):
            for sub in itertools.combinations(reps, k):
                rows.append((storage_cost(sub, videos), obj.value(sub) if obj.groups else 0.0, sub))
        tables.append(rows)
    best = None
    if tables:
        st = np.zeros(1)
        val = np.zeros(1)
        for rows in tables:
            s2 = np.array([r[0] for r in rows])
            v2 = np.array([r[1] for r in rows])
            st = (st[:, None] + s2[None, :]).ravel()
            val = (val[:, None] + v2[None, :]).ravel()
        feasible = st <= storage_budget + 1e-9
        idx = np.flatnonzero(feasible)
        top = val[idx].max()
        cand = idx[val[idx] >= top - EPS]
        sizes = [len(t) for t in tables]
        options = []
        for flat in cand:
            parts = np.unravel_index(flat, sizes)
            reps = tuple(r for rows, p in zip(tables, parts) for r in rows[p][2])
            options.append((st[flat], _lex(reps), float(val[flat]), reps))
        s, _, v, reps = min(options, key=lambda o: (o[0], o[1]))
        best = (v, reps)
    value, reps = best if best else (0.0, ())
    return _report(frozenset(reps), value, storage_budget, population, videos, objectives,
                   0, time.perf_counter() - t0, True, 0.0, {})
