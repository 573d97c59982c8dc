"""Reference selections: partial adaptation, provider ladders, per-video budgets."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..model import ModelError, Representation, RepresentationSet, VideoModel
from ..population import UserClass
from .evaluate import CandidateLadder, VideoObjective, user_types
from .search import (DEFAULT_NODE_LIMIT, Frontier, OptimizationReport, _candidates, _report,
                     merge_frontiers, video_frontiers)


class SpacingInvalid(ModelError):
    pass


# 1080p ladders in kbps, each with the extra 400 kbps rung
PROVIDER_LADDERS = {
    "apple": (400, 11000, 24000, 39000),
    "netflix": (400, 4300, 5800),
    "youtube": (400, 4072),
}


def subsample_views(video: VideoModel, spacing: float) -> tuple[int, ...]:
    """Cameras every ``spacing`` label units from the first, plus the last camera."""
    labels = [video.label_of_tick(c) for c in video.cameras]
    gaps = {round(b - a, 9) for a, b in zip(labels, labels[1:])}
    if spacing <= 0 or len(gaps) != 1:
        raise SpacingInvalid(f"{video.id}: spacing {spacing} needs evenly spaced cameras")
    step = spacing / gaps.pop()
    if abs(step - round(step)) > 1e-9:
        raise SpacingInvalid(f"{video.id}: spacing {spacing} is not a multiple of the camera gap")
    step = int(round(step))
    picked = list(video.cameras[::step])
    if picked[-1] != video.cameras[-1]:
        picked.append(video.cameras[-1])
    return tuple(picked)


def _union(frontiers: Sequence[Frontier]) -> Frontier:
    out = Frontier()
    for fr in frontiers:
        for s, v, reps in fr.points():
            out.add(s, v, reps)
        out.nodes += fr.nodes
        out.abandoned_bound = max(out.abandoned_bound, fr.abandoned_bound)
    return out


def _limited(frontiers: Mapping[str, Frontier]) -> bool:
    return any(f.abandoned_bound > float("-inf") for f in frontiers.values())


def pa_sweep(catalog: CandidateLadder, population: Sequence[UserClass], budgets: Sequence[float],
             videos: Mapping[str, VideoModel], spacing: float,
             node_limit: int = DEFAULT_NODE_LIMIT, workers: int = 1) -> list[OptimizationReport]:
    """Partial adaptation: subsampled views, one common rate per video.

    Within the subsampled views the stored subset is still optimized, so a
    coarser spacing never beats a finer one that contains it.
    """
    t0 = time.perf_counter()
    cands = _candidates(catalog, videos)
    allowed = {vid: set(subsample_views(videos[vid], spacing))
               for vid in {r.video for r in cands}}
    cap = max(budgets)
    per_rate = []
    for rate in sorted({r.rate for r in cands}):
        sub = [r for r in cands if r.rate == rate and r.view in allowed[r.video]]
        if sub:
            per_rate.append(video_frontiers(sub, population, videos, cap, node_limit,
                                            workers=workers)[0])
    frontiers = {vid: _union([f[vid] for f in per_rate if vid in f])
                 for vid in sorted(allowed)}
    limited = _limited(frontiers)
    objectives = {vid: VideoObjective(videos[vid], [t for t in user_types(population)
                                                    if t.video == vid]) for vid in frontiers}
    elapsed = time.perf_counter() - t0
    nodes = sum(f.nodes for f in frontiers.values())
    out = []
    for budget in budgets:
        value, _, reps = merge_frontiers(frontiers, budget)
        rep = _report(frozenset(reps), value, budget, population, videos, objectives, nodes,
                      elapsed, not limited, 0.0, {})
        rep.method = f"pa-{spacing:g}"
        out.append(rep)
    return out


def pa_baseline(catalog: CandidateLadder, population: Sequence[UserClass], storage_budget: float,
                videos: Mapping[str, VideoModel], spacing: float,
                node_limit: int = DEFAULT_NODE_LIMIT) -> OptimizationReport:
    return pa_sweep(catalog, population, [storage_budget], videos, spacing, node_limit)[0]


def recommended_set(provider: str, videos: Mapping[str, VideoModel],
                    population: Sequence[UserClass] | None = None,
                    cameras: Mapping[str, Sequence[int]] | None = None,
                    resolution: str = "1080p") -> RepresentationSet:
    """Provider ladder on every camera view, then trimmed to the views that matter.

    With a population, views whose removal leaves every video's expected
    satisfaction unchanged are dropped one at a time (left to right), so the
    result keeps the best attainable satisfaction at a smaller storage.
    """
    try:
        ladder = PROVIDER_LADDERS[provider]
    except KeyError:
        raise ModelError(f"unknown provider {provider!r}") from None
    reps = []
    for vid in sorted(videos):
        video = videos[vid]
        cams = tuple(cameras[vid]) if cameras and vid in cameras else video.cameras
        kept = list(cams)
        if population is not None:
            obj = VideoObjective(video, [t for t in user_types(population) if t.video == vid])
            if obj.groups:
                def value(views):
                    return obj.value([Representation(vid, v, r, resolution)
                                      for v in views for r in ladder])
                best = value(kept)
                for v in cams:
                    trial = [x for x in kept if x != v]
                    if value(trial) >= best - 1e-12:
                        kept = trial
            else:
                kept = []
        reps += [Representation(vid, v, r, resolution) for v in kept for r in ladder]
    return RepresentationSet.build(reps, videos)


@dataclass
class JointComparison:
    per_video_budget: float
    joint: float
    independent: float
    joint_per_video: dict[str, float] = field(default_factory=dict)
    independent_per_video: dict[str, float] = field(default_factory=dict)
    joint_storage: dict[str, float] = field(default_factory=dict)
    optimal: bool = True


def joint_vs_independent(catalog, population: Sequence[UserClass], per_video_budgets: Sequence[float],
                         videos: Mapping[str, VideoModel],
                         node_limit: int = DEFAULT_NODE_LIMIT,
                         workers: int = 1) -> list[JointComparison]:
    """Pooled budget ``|videos| * C`` against a separate budget ``C`` per video.

    Per-video values are weighted contributions to the population objective.
    """
    cands = _candidates(catalog, videos)
    vids = sorted({r.video for r in cands})
    cap = len(vids) * max(per_video_budgets)
    frontiers, _, _ = video_frontiers(cands, population, videos, cap, node_limit,
                                     workers=workers)
    out = []
    for c in per_video_budgets:
        value, _, reps = merge_frontiers(frontiers, len(vids) * c)
        jp, js = {}, {}
        for vid in vids:
            mine = [r for r in reps if r.video == vid]
            k = frontiers[vid].sets.index(tuple(mine)) if tuple(mine) in frontiers[vid].sets else None
            jp[vid] = frontiers[vid].values[k] if k is not None else 0.0
            js[vid] = frontiers[vid].storages[k] if k is not None else 0.0
        ip = {vid: max(frontiers[vid].best_at(c), 0.0) for vid in vids}
        out.append(JointComparison(c, value, sum(ip.values()), jp, ip, js,
                                   not _limited(frontiers)))
    return out
