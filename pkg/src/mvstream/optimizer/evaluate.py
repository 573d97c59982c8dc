"""Candidate ladders, user types and the expected-satisfaction objective."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..client import (AdaptationError, AdaptationResult, SegmentSums, best_chain_dp,
                      chain_front, spannable)
from ..model import ModelError, NavigationWindow, Representation, RepresentationSet, VideoModel
from ..population import UserClass
from .fastfront import chain_of, front_dp


@dataclass(frozen=True)
class CandidateLadder:
    """Rates (kbps) x resolutions x camera views that may be encoded.

    ``cameras`` maps a video id to the ticks allowed for it; videos absent
    from the map use all their cameras.
    """

    rates: tuple[int, ...]
    resolutions: tuple[str, ...] = ("1080p",)
    cameras: Mapping[str, tuple[int, ...]] | None = None
    videos: tuple[str, ...] | None = None  # restrict to these contents

    def __post_init__(self):
        rates = tuple(int(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ModelError("ladder rates must be strictly increasing")
        if not rates or rates[0] <= 0:
            raise ModelError("ladder rates must be positive")

    def candidates(self, videos: Mapping[str, VideoModel]) -> list[Representation]:
        out = []
        names = self.videos if self.videos is not None else sorted(videos)
        for vid in names:
            video = videos[vid]
            cams = video.cameras
            if self.cameras and vid in self.cameras:
                cams = tuple(self.cameras[vid])
                if set(cams) - set(video.cameras):
                    raise ModelError(f"{vid}: ladder views {set(cams) - set(video.cameras)} are not cameras")
            for r in self.rates:
                if not video.admissible(r):
                    raise ModelError(f"{vid}: rate {r} kbps outside the fitted quality domain")
            for s in self.resolutions:
                for v in cams:
                    for r in self.rates:
                        out.append(Representation(vid, v, r, s))
        return sorted(out, key=Representation.key)

    def restricted(self, **changes) -> "CandidateLadder":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class UserType:
    """One (class, window) pair; ``weight`` = class fraction x window probability."""

    class_index: int
    window_index: int
    weight: float
    video: str
    resolution: str
    budget: float
    window: NavigationWindow


def user_types(population: Sequence[UserClass]) -> list[UserType]:
    out = []
    for i, c in enumerate(population):
        for k, (w, q) in enumerate(c.windows):
            out.append(UserType(i, k, c.fraction * q, c.video, c.resolution, c.budget, w))
    return out


def expected_satisfaction(rep_set: RepresentationSet | Iterable[Representation],
                          population: Sequence[UserClass],
                          videos: Mapping[str, VideoModel],
                          chains: dict | None = None) -> float:
    """Population-weighted satisfaction of a stored set.

    Windows a class cannot download (unspannable or over budget) score 0.
    If ``chains`` is given it is filled with ``(class, window) -> result``.
    """
    reps = rep_set.reps if isinstance(rep_set, RepresentationSet) else frozenset(rep_set)
    total = 0.0
    for c_idx, cls in enumerate(population):
        video = videos.get(cls.video)
        for w_idx, (w, q) in enumerate(cls.windows):
            res: AdaptationResult | None = None
            if video is not None:
                try:
                    res = best_chain_dp(w, reps, cls.budget, video, cls.resolution)
                except AdaptationError:
                    res = None
            if chains is not None:
                chains[(c_idx, w_idx)] = res
            if res is not None:
                total += cls.fraction * q * (1.0 - res.distortion)
    return total


class _Group:
    """User types sharing one (resolution, window): one DP serves them all."""

    def __init__(self, video: VideoModel, resolution: str, window: NavigationWindow):
        self.resolution = resolution
        self.window = window
        self.sums = SegmentSums(video, window)
        self.types: list[UserType] = []
        self.index: dict[Representation, int] = {}

    @property
    def bw_cap(self) -> float:
        return max(t.budget for t in self.types)

    def prepare(self, candidates: Sequence[Representation]) -> None:
        """Dense segment/closed-end tables over ``candidates`` for the compiled DP."""
        reps = sorted((r for r in candidates if r.resolution == self.resolution),
                      key=lambda r: (r.view, r.rate))
        lo, hi = self.window.lo, self.window.hi
        n = len(reps)
        self.reps = reps
        self.index = {r: k for k, r in enumerate(reps)}
        self.views = np.array([r.view for r in reps], dtype=np.int64)
        self.rates = np.array([r.rate for r in reps], dtype=np.float64)
        self.seg = np.full((n, n), np.nan)
        for i, a in enumerate(reps):
            for j, b in enumerate(reps):
                if a.view < b.view and (max(a.view, lo) < min(b.view, hi + 1) or b.view == hi):
                    self.seg[i, j] = self.sums(a, b)
        self.endc = np.array([self.sums.coding(r.rate) if r.view == hi else 0.0 for r in reps])

    def covers(self, reps) -> bool:
        return all(r in self.index for r in reps if r.resolution == self.resolution)

    def front(self, reps: Sequence[Representation], extra: dict | None = None,
              extra_cap: float = float("inf")) -> list[tuple]:
        """Same entries as :func:`chain_front`: (bw, extra, distortion, anchors)."""
        idx = np.array(sorted(self.index[r] for r in reps if r.resolution == self.resolution),
                       dtype=np.int64)
        x = np.zeros(len(idx))
        if extra:
            for k, g in enumerate(idx):
                x[k] = extra.get(self.reps[g], 0.0)
        bw, xx, dd, rep, nxt, front = front_dp(
            self.views[idx], self.rates[idx], x, self.seg[np.ix_(idx, idx)], self.endc[idx],
            self.window.lo, self.window.hi, float(self.bw_cap), float(extra_cap))
        return [(float(bw[e]), float(xx[e]), float(dd[e]), _LazyChain(self.reps, idx, rep, nxt, int(e)))
                for e in front]


class _LazyChain:
    """Anchors of one pool entry, unfolded on first iteration."""

    __slots__ = ("reps", "idx", "rep", "nxt", "e")

    def __init__(self, reps, idx, rep, nxt, e):
        self.reps, self.idx, self.rep, self.nxt, self.e = reps, idx, rep, nxt, e

    def __iter__(self):
        return iter([self.reps[self.idx[k]] for k in chain_of(self.rep, self.nxt, self.e)])


class VideoObjective:
    """Objective restricted to the user types of one video.

    ``value`` scores a stored subset; ``bound`` relaxes the subset to any
    superset drawn from ``undecided`` whose extra storage fits ``slack``.
    After :meth:`prepare` the chain fronts come from the compiled DP.
    """

    def __init__(self, video: VideoModel, types: Sequence[UserType]):
        self.video = video
        self.groups: dict[tuple, _Group] = {}
        for t in types:
            key = (t.resolution, t.window.lo, t.window.hi)
            g = self.groups.get(key)
            if g is None:
                g = self.groups[key] = _Group(video, t.resolution, t.window)
            g.types.append(t)
        self.weight = sum(t.weight for t in types)
        self.prepared = False

    def prepare(self, candidates: Sequence[Representation]) -> None:
        for g in self.groups.values():
            g.prepare(candidates)
        self.prepared = True

    def _front(self, g: _Group, rs, extra=None, extra_cap=float("inf")) -> list[tuple]:
        if self.prepared and g.covers(rs):
            return g.front(rs, extra, extra_cap)
        xc = (lambda r: extra.get(r, 0.0)) if extra else None
        return chain_front(rs, g.window, g.sums, bw_cap=g.bw_cap, extra_cost=xc,
                           extra_cap=extra_cap)

    def value(self, reps: Iterable[Representation]) -> float:
        reps = list(reps)
        total = 0.0
        for g in self.groups.values():
            rs = [r for r in reps if r.resolution == g.resolution]
            if not spannable(rs, g.window):
                continue
            front = self._front(g, rs)
            n = len(g.window)
            for t in g.types:
                e = next((e for e in front if e[0] <= t.budget), None)
                if e is not None:
                    total += t.weight * (1.0 - e[2] / n)
        return total

    def bound(self, included: Sequence[Representation], undecided: Sequence[Representation],
              slack: float, included_views: set[int]) -> "BoundProfile":
        """Upper bound on the value of any completion, as a function of added storage."""
        inc = set(included)
        half_depth = self.video.depth_overhead / 2.0
        # at most two reps of a chain share a view, so half the depth
        # overhead per new-view rep never over-charges
        extra = {r: r.rate + (half_depth if r.view not in included_views else 0.0)
                 for r in undecided}
        pool = list(included) + list(undecided)
        steps = []
        for g in self.groups.values():
            rs = [r for r in pool if r.resolution == g.resolution]
            if not spannable(rs, g.window):
                continue
            front = self._front(g, rs, extra, slack)
            n = len(g.window)
            for t in g.types:
                # entries come sorted by distortion; keep those needing less extra storage
                stair = []
                for e in front:
                    if e[0] <= t.budget and (not stair or e[1] < stair[-1][0]):
                        stair.append((e[1], t.weight * (1.0 - e[2] / n), e[3]))
                if stair:
                    stair.reverse()
                    steps.append((t.weight, stair))
        return BoundProfile(steps, inc)


class BoundProfile:
    """Step function ``x -> ub(x)``: best value reachable adding at most ``x`` storage.

    Every type may pick its best chain using at most ``x`` of extra storage,
    since any completion adding ``x`` contains each type's chain.
    """

    def __init__(self, steps, included):
        self.steps = steps  # per type: [(extra, value, chain)] with extra and value ascending
        self.included = included
        self.levels = np.array(sorted({x for _, st in steps for x, _, _ in st}))
        self.values = np.array([self._max_bound(x) for x in self.levels])

    def _pick(self, stair, x):
        k = bisect.bisect_right([s[0] for s in stair], x + 1e-9)
        return stair[k - 1] if k else None

    def _max_bound(self, x: float) -> float:
        total = 0.0
        for _, st in self.steps:
            e = self._pick(st, x)
            if e is not None:
                total += e[1]
        return total

    @property
    def top(self) -> float:
        return float(self.values[-1]) if len(self.values) else 0.0

    def scores(self, x: float) -> dict[Representation, float]:
        """Weight of the per-type relaxed chains at level ``x`` using each undecided rep."""
        out: dict[Representation, float] = {}
        for w, st in self.steps:
            e = self._pick(st, x)
            if e is None:
                continue
            for r in e[2]:
                if r not in self.included:
                    out[r] = out.get(r, 0.0) + w
        return out
