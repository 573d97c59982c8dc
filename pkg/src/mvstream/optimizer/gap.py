"""Cost of the segment structure: free-pairing vs chain-constrained set optima.

For a small random instance every storage-feasible stored set is scored
twice: once with clients restricted to C1/C2 segment chains, once with each
viewpoint free to use its best bracketing pair among the downloaded
representations. The gap between the two set-level optima is never negative.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..client import (AdaptationError, InstanceTooLarge, best_chain_bruteforce,
                      free_representation_bruteforce)
from ..model import CONTENT_PRESETS, NavigationWindow, Representation, VideoModel, make_video

GAP_TOL = 1e-9


@dataclass(frozen=True)
class GapInstance:
    video: VideoModel
    candidates: tuple[Representation, ...]
    windows: tuple[tuple[NavigationWindow, float], ...]
    budget: float  # client kbps per chunk
    storage: float  # server kbps


@dataclass(frozen=True)
class GapResult:
    index: int
    free_value: float
    chain_value: float
    free_set: tuple[Representation, ...]
    chain_set: tuple[Representation, ...]
    skipped: str = ""

    @property
    def gap(self) -> float:
        return self.free_value - self.chain_value

    @property
    def zero(self) -> bool:
        return abs(self.gap) <= GAP_TOL


def random_instance(rng: np.random.Generator, max_cameras: int = 3, max_rates: int = 2,
                    ladder: Sequence[int] = (300, 600, 1000, 2000, 4000),
                    max_q: int = 3) -> GapInstance:
    name = str(rng.choice(sorted(CONTENT_PRESETS)))
    n_cam = int(rng.integers(2, max_cameras + 1))
    q = int(rng.integers(1, max_q + 1))
    video = make_video(name, labels=tuple(8.0 * k for k in range(n_cam)), q_ticks=q)
    rates = sorted(int(r) for r in rng.choice(ladder, size=int(rng.integers(1, max_rates + 1)),
                                              replace=False))
    cands = tuple(Representation(name, v, r) for v in video.cameras for r in rates)
    windows = []
    for _ in range(int(rng.integers(1, 3))):
        lo = int(rng.integers(video.first, video.last + 1))
        hi = int(rng.integers(lo, video.last + 1))
        windows.append(NavigationWindow(lo, hi))
    merged: dict[NavigationWindow, float] = {}
    for w in windows:
        merged[w] = merged.get(w, 0.0) + 1.0 / len(windows)
    total = sum(r.rate for r in cands)
    budget = float(rng.uniform(2 * rates[0], 2 * n_cam * rates[-1]))
    storage = float(rng.uniform(2 * rates[0], total + 1))
    return GapInstance(video, cands, tuple(sorted(merged.items(), key=lambda kv: (kv[0].lo, kv[0].hi))),
                       budget, storage)


def _score(fn, w, sub, budget, video) -> float:
    try:
        d = fn(w, sub, budget, video)
    except AdaptationError:
        return 0.0
    return 1.0 - (d if isinstance(d, float) else d.distortion)


def solve_gap(inst: GapInstance, index: int = 0, max_candidates: int = 8) -> GapResult:
    """Set-level optima under free pairing and under segment chains."""
    if len(inst.candidates) > max_candidates:
        raise InstanceTooLarge(f"{len(inst.candidates)} candidates > guard {max_candidates}")
    best_free = (-1.0, ())
    best_chain = (-1.0, ())
    for k in range(len(inst.candidates) + 1):
        for sub in itertools.combinations(inst.candidates, k):
            if sum(r.rate for r in sub) > inst.storage + 1e-9:
                continue
            free = chain = 0.0
            for w, p in inst.windows:
                free += p * _score(free_representation_bruteforce, w, sub, inst.budget, inst.video)
                chain += p * _score(best_chain_bruteforce, w, sub, inst.budget, inst.video)
            if free > best_free[0] + GAP_TOL:
                best_free = (free, sub)
            if chain > best_chain[0] + GAP_TOL:
                best_chain = (chain, sub)
    return GapResult(index, best_free[0], best_chain[0], best_free[1], best_chain[1])


def gap_study(n: int, seed: int = 0, **kw) -> list[GapResult]:
    """``n`` random instances from one seed; oversized ones are skipped with a note."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        inst = random_instance(rng, **kw)
        try:
            out.append(solve_gap(inst, i))
        except InstanceTooLarge as exc:
            out.append(GapResult(i, float("nan"), float("nan"), (), (), skipped=str(exc)))
    return out


def zero_gap_fraction(results: Sequence[GapResult]) -> float:
    done = [r for r in results if not r.skipped]
    return sum(r.zero for r in done) / len(done) if done else float("nan")
