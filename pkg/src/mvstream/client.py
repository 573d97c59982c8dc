"""Client adaptation: pick the best segment chain for a navigation window.

The dynamic program walks anchors left to right. ``Phi(l, b)``, the least
aggregate distortion of the rest of the window given that ``l`` is already
downloaded and ``b`` kbps remain, is a step function of ``b``; each anchor
keeps it as a Pareto front of (cost, distortion) pairs, so one pass answers
every budget exactly.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from itertools import combinations
from operator import itemgetter
from typing import Callable, Sequence

from .model import (ModelError, NavigationModel, NavigationWindow, Representation,
                    VideoModel, _synth, coding_distortion)
from .segments import (MvNavigationSegment, SegmentSet, check_c1, check_c2,
                       viewpoint_distortions)


class AdaptationError(Exception):
    pass


class Infeasible(AdaptationError):
    """No valid chain fits the bandwidth budget."""


class UnspannableWindow(AdaptationError):
    """Stored views cannot bracket the window."""


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class AdaptationResult:
    chain: SegmentSet
    distortion: float  # mean over the window's viewpoints
    total_distortion: float
    cost: float

    @property
    def satisfaction(self) -> float:
        return 1.0 - self.distortion


def navigation_window(u: int, nav: NavigationModel, video: VideoModel) -> NavigationWindow:
    if not video.first <= u <= video.last:
        raise ModelError(f"start viewpoint {u} outside camera range")
    reach = nav.reach_ticks(video)
    return NavigationWindow(max(video.first, u - reach), min(video.last, u + reach))


def _candidates(stored, video: str, resolution: str) -> list[Representation]:
    reps = stored.reps if hasattr(stored, "reps") else stored
    return sorted({r for r in reps if r.video == video and r.resolution == resolution},
                  key=lambda r: (r.view, r.rate))


def chain_from_reps(reps: Sequence[Representation]) -> SegmentSet:
    """Segments of an anchor sequence; two consecutive reps at one view mark a rate switch."""
    segs = []
    prev = reps[0]
    for r in reps[1:]:
        if r.view != prev.view:
            segs.append(MvNavigationSegment(prev, r))
        prev = r
    return SegmentSet(segs)


# -- Pareto-front dynamic program --------------------------------------------

# Front entry: (bandwidth cost, extra cost, aggregate distortion, anchors).
# Inside the DP the anchors are a cons list ``(rep, rest)`` so extending a
# chain is O(1); fronts handed back to callers carry plain tuples.
Entry = tuple


def _prune(entries: list[Entry], bw_cap: float, extra_cap: float) -> list[Entry]:
    entries = [e for e in entries if e[0] <= bw_cap and e[1] <= extra_cap]
    # stable sort keeps construction order among exact ties
    entries.sort(key=itemgetter(2, 0, 1))
    kept: list[Entry] = []
    if all(e[1] == 0 for e in entries):
        best_bw = float("inf")
        for e in entries:
            if e[0] < best_bw:
                kept.append(e)
                best_bw = e[0]
        return kept
    # staircase of kept (bw, extra): bw ascending, extra strictly descending
    sb: list[float] = []
    sx: list[float] = []
    for e in entries:
        b, x = e[0], e[1]
        k = bisect_right(sb, b)
        if k and sx[k - 1] <= x:
            continue
        kept.append(e)
        j = k
        while j < len(sb) and sx[j] >= x:
            j += 1
        sb[k:j] = [b]
        sx[k:j] = [x]
    return kept


def _unfold(cons) -> tuple:
    out = []
    while cons is not None:
        out.append(cons[0])
        cons = cons[1]
    return tuple(out)


def _chain_key(reps) -> tuple:
    return tuple((r.view, r.rate) for r in reps)


class SegmentSums:
    """Cached aggregate distortion of the viewpoints each anchor pair owns in ``w``."""

    def __init__(self, video: VideoModel, w: NavigationWindow):
        self.video = video
        self.w = w
        self._dist: dict[int, float] = {}
        self._cache: dict[tuple, float] = {}

    def coding(self, rate: int) -> float:
        d = self._dist.get(rate)
        if d is None:
            d = self._dist[rate] = coding_distortion(self.video, rate)
        return d

    def owned(self, v_left: int, v_right: int) -> range:
        return range(max(v_left, self.w.lo), min(v_right, self.w.hi + 1))

    def __call__(self, left: Representation, right: Representation) -> float:
        key = (left.view, left.rate, right.view, right.rate)
        s = self._cache.get(key)
        if s is None:
            d_l, d_r = self.coding(left.rate), self.coding(right.rate)
            s = 0.0
            for u in self.owned(left.view, right.view):
                s += _synth(self.video, u, left.view, d_l, right.view, d_r)
            self._cache[key] = s
        return s


def chain_front(reps: Sequence[Representation], w: NavigationWindow, sums: SegmentSums,
                bw_cap: float = float("inf"), extra_cost: Callable[[Representation], float] | None = None,
                extra_cap: float = float("inf"), max_mismatch: float | None = None) -> list[Entry]:
    """Pareto front of all valid chains over ``w`` built from ``reps``.

    ``extra_cost`` attaches a second additive cost to each anchor (the
    optimizer uses it for storage not yet committed).
    """
    reps = sorted(reps, key=lambda r: (r.view, r.rate))
    n = len(reps)
    lo, hi = w.lo, w.hi
    xc = extra_cost or (lambda r: 0.0)
    extra = [xc(r) for r in reps]
    cont: list[list[Entry] | None] = [None] * n
    done: list[list[Entry] | None] = [None] * n
    by_view: dict[int, list[int]] = {}
    for i, r in enumerate(reps):
        by_view.setdefault(r.view, []).append(i)

    def allowed(i: int, j: int) -> bool:
        a, b = reps[i], reps[j]
        if max_mismatch is not None and abs(a.rate - b.rate) > max_mismatch:
            return False
        return max(a.view, lo) < min(b.view, hi + 1) or b.view == hi

    def get_cont(i: int) -> list[Entry]:
        if cont[i] is None:
            out = []
            for j in range(n):
                if reps[j].view <= reps[i].view or not allowed(i, j):
                    continue
                seg = sums(reps[i], reps[j])
                r, bj, xj = reps[j], reps[j].rate, extra[j]
                bmax, xmax = bw_cap - bj, extra_cap - xj
                for e in get_done(j):
                    if e[0] <= bmax and e[1] <= xmax:
                        out.append((bj + e[0], xj + e[1], seg + e[2], (r, e[3])))
            cont[i] = _prune(out, bw_cap, extra_cap)
        return cont[i]

    def get_done(i: int) -> list[Entry]:
        if done[i] is None:
            v = reps[i].view
            if v > hi:
                done[i] = [(0, 0.0, 0.0, None)]
            else:
                out = list(get_cont(i))
                if v == hi:
                    out.append((0, 0.0, sums.coding(reps[i].rate), None))
                for k in by_view[v]:
                    if k == i:
                        continue
                    r, bk, xk = reps[k], reps[k].rate, extra[k]
                    bmax, xmax = bw_cap - bk, extra_cap - xk
                    for e in get_cont(k):
                        if e[0] <= bmax and e[1] <= xmax:
                            out.append((bk + e[0], xk + e[1], e[2], (r, e[3])))
                done[i] = _prune(out, bw_cap, extra_cap)
        return done[i]

    # anchors are visited right to left so recursion depth stays shallow
    for i in range(n - 1, -1, -1):
        get_done(i)
    first = []
    for i in range(n):
        if reps[i].view > lo:
            break
        r, bi, xi = reps[i], reps[i].rate, extra[i]
        for e in get_cont(i):
            first.append((bi + e[0], xi + e[1], e[2], (r, e[3])))
    return [(e[0], e[1], e[2], _unfold(e[3])) for e in _prune(first, bw_cap, extra_cap)]


def spannable(reps: Sequence[Representation], w: NavigationWindow) -> bool:
    views = [r.view for r in reps]
    return bool(views) and min(views) <= w.lo and max(views) >= w.hi and min(views) < max(views)


def best_chain_dp(w: NavigationWindow, stored, budget: float, video: VideoModel,
                  resolution: str = "1080p", max_mismatch: float | None = None,
                  sums: SegmentSums | None = None) -> AdaptationResult:
    """Least-distortion C1/C2-valid chain whose download cost fits ``budget``."""
    reps = _candidates(stored, video.id, resolution)
    if not spannable(reps, w):
        raise UnspannableWindow(f"{video.id}: stored views cannot bracket [{w.lo}, {w.hi}]")
    if sums is None:
        sums = SegmentSums(video, w)
    front = chain_front(reps, w, sums, bw_cap=budget, max_mismatch=max_mismatch)
    if not front:
        raise Infeasible(f"{video.id}: no chain within {budget} kbps")
    bw, _, total, anchors = front[0]
    return AdaptationResult(chain_from_reps(anchors), total / len(w), total, float(bw))


# -- Brute-force oracles ---------------------------------------------------

def _idle_segment(segs: Sequence[MvNavigationSegment], w: NavigationWindow) -> bool:
    for k, s in enumerate(segs):
        owns = any(s.covers(u) for u in w.points())
        closes = (k == len(segs) - 1 and s.right.view == w.hi
                  and not any(t.covers(w.hi) for t in segs))
        if not (owns or closes):
            return True
    return False


def _all_chains(reps: Sequence[Representation]):
    """Every anchor sequence with increasing views and optional rate switches."""
    by_view: dict[int, list[Representation]] = {}
    for r in reps:
        by_view.setdefault(r.view, []).append(r)

    def extend(seq):
        last = seq[-1]
        switches = [None] + [r for r in by_view[last.view] if r != last]
        for sw in switches:
            if sw is not None and len(seq) == 1:
                continue
            base = seq + [sw] if sw is not None else seq
            for r in reps:
                if r.view > last.view:
                    nxt = base + [r]
                    yield nxt
                    yield from extend(nxt)

    for r in reps:
        yield from extend([r])


def best_chain_bruteforce(w: NavigationWindow, stored, budget: float, video: VideoModel,
                          resolution: str = "1080p", max_mismatch: float | None = None,
                          max_reps: int = 12) -> AdaptationResult:
    """Exhaustive search over all valid chains (oracle for :func:`best_chain_dp`)."""
    reps = _candidates(stored, video.id, resolution)
    if len(reps) > max_reps:
        raise InstanceTooLarge(f"{len(reps)} representations > guard {max_reps}")
    best = None
    for seq in _all_chains(reps):
        chain = chain_from_reps(seq)
        segs = list(chain)
        if max_mismatch is not None and any(abs(s.left.rate - s.right.rate) > max_mismatch
                                            for s in segs):
            continue
        cost = sum(r.rate for r in set(seq))
        if cost > budget or not check_c1(segs) or not check_c2(segs, w) or _idle_segment(segs, w):
            continue
        d = viewpoint_distortions(segs, w, video)
        total = sum(d[u] for u in w.points())
        key = (total, cost, _chain_key(seq))
        if best is None or key < best[0]:
            best = (key, chain)
    if best is None:
        if not spannable(reps, w):
            raise UnspannableWindow(f"{video.id}: stored views cannot bracket [{w.lo}, {w.hi}]")
        raise Infeasible(f"{video.id}: no chain within {budget} kbps")
    (total, cost, _), chain = best
    return AdaptationResult(chain, total / len(w), total, float(cost))


def free_representation_bruteforce(w: NavigationWindow, stored, budget: float,
                                   video: VideoModel, resolution: str = "1080p",
                                   max_reps: int = 12) -> float:
    """Mean window distortion when every viewpoint may use any downloaded pair.

    No segment structure is imposed: each viewpoint takes its best bracketing
    anchor pair among the downloaded subset. Pairs own ``[left, right)`` as
    segments do, and the window's right end may also be decoded directly from
    a downloaded representation at that view.
    """
    reps = _candidates(stored, video.id, resolution)
    if len(reps) > max_reps:
        raise InstanceTooLarge(f"{len(reps)} representations > guard {max_reps}")
    coding = {r: coding_distortion(video, r.rate) for r in reps}
    pts = list(w.points())
    best = None
    for k in range(2, len(reps) + 1):
        for subset in combinations(reps, k):
            if sum(r.rate for r in subset) > budget:
                continue
            total = 0.0
            for u in pts:
                d_u = min((_synth(video, u, a.view, coding[a], b.view, coding[b])
                           for a in subset for b in subset
                           if a.view <= u < b.view), default=None)
                if u == w.hi:
                    ends = [coding[r] for r in subset if r.view == u]
                    if ends and any(r.view < u for r in subset):
                        d_u = min(ends + ([d_u] if d_u is not None else []))
                if d_u is None:
                    break
                total += d_u
            else:
                if best is None or total < best:
                    best = total
    if best is None:
        raise Infeasible(f"{video.id}: no representation subset covers the window")
    return best / len(pts)
