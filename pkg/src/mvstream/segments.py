"""Multi-view navigation segments: construction, C1/C2 checks, coverage matrices."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .model import (ModelError, NavigationWindow, Representation, VideoModel,
                    _synth, coding_distortion)


@dataclass(frozen=True)
class MvNavigationSegment:
    """Anchor pair responsible for viewpoints ``[left.view, right.view)``."""

    left: Representation
    right: Representation

    def __post_init__(self):
        if not self.left.view < self.right.view:
            raise ModelError("segment anchors must satisfy left.view < right.view")
        if self.left.video != self.right.video:
            raise ModelError("segment anchors belong to different videos")
        if self.left.resolution != self.right.resolution:
            raise ModelError("segment anchors have different resolutions")

    @property
    def covered(self) -> range:
        return range(self.left.view, self.right.view)

    def covers(self, u: int) -> bool:
        return self.left.view <= u < self.right.view


@dataclass(frozen=True)
class SegmentSet:
    segments: tuple[MvNavigationSegment, ...]

    def __init__(self, segments: Iterable[MvNavigationSegment]):
        object.__setattr__(self, "segments",
                           tuple(sorted(segments, key=lambda s: (s.left.view, s.right.view,
                                                                 s.left.rate, s.right.rate))))

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def representations(self) -> list[Representation]:
        """Distinct anchors, each billed once even if shared by two segments."""
        reps = {r for s in self.segments for r in (s.left, s.right)}
        return sorted(reps, key=Representation.key)

    @property
    def download_cost(self) -> float:
        return float(sum(r.rate for r in self.representations()))


def enumerate_segments(stored: Iterable[Representation], video: str, resolution: str,
                       max_mismatch: float | None = None) -> list[MvNavigationSegment]:
    """All anchor pairs with ``left.view < right.view`` from the stored reps.

    ``max_mismatch`` optionally caps ``|r_L - r_R|`` (kbps).
    """
    reps = sorted((r for r in stored if r.video == video and r.resolution == resolution),
                  key=Representation.key)
    out = []
    for a, b in combinations(reps, 2):
        if a.view == b.view:
            continue
        left, right = (a, b) if a.view < b.view else (b, a)
        if max_mismatch is not None and abs(left.rate - right.rate) > max_mismatch:
            continue
        out.append(MvNavigationSegment(left, right))
    out.sort(key=lambda s: (s.left.view, s.right.view, s.left.rate, s.right.rate))
    return out


def check_c1(chain: SegmentSet | Sequence[MvNavigationSegment]) -> bool:
    """Consecutive segments abut on a shared camera view and never overlap."""
    segs = list(chain)
    for a, b in zip(segs, segs[1:]):
        if a.right.view != b.left.view:
            return False
    return True


def check_c2(chain: SegmentSet | Sequence[MvNavigationSegment], w: NavigationWindow) -> bool:
    """Every lattice viewpoint of ``w`` is covered.

    Coverage is half-open, except the window's right end, which also counts
    as covered when it coincides with a right anchor view.
    """
    segs = list(chain)
    if not segs:
        return False
    for u in w.points():
        if any(s.covers(u) for s in segs):
            continue
        if u == w.hi and any(s.right.view == u for s in segs):
            continue
        return False
    return True


def viewpoint_distortions(chain: SegmentSet | Sequence[MvNavigationSegment],
                          w: NavigationWindow, video: VideoModel) -> dict[int, float]:
    """Per-viewpoint distortion of ``w`` when rendered from a segment chain.

    A viewpoint uses the segment whose half-open range holds it. The window's
    right end, if only reached as a right anchor, is decoded from that anchor
    directly. Raises ``ModelError`` on an uncovered viewpoint.
    """
    segs = list(chain)
    out = {}
    for u in w.points():
        seg = next((s for s in segs if s.covers(u)), None)
        if seg is not None:
            out[u] = _synth(video, u, seg.left.view, coding_distortion(video, seg.left.rate),
                            seg.right.view, coding_distortion(video, seg.right.rate))
            continue
        end = next((s.right for s in segs if s.right.view == u), None)
        if u == w.hi and end is not None:
            out[u] = coding_distortion(video, end.rate)
            continue
        raise ModelError(f"viewpoint {u} not covered by chain")
    return out


def build_coverage_matrices(segments: Sequence[MvNavigationSegment], viewpoints: Sequence[int],
                            cameras: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """0/1 matrices ``a`` (segment x viewpoint) and ``b`` (segment x camera)."""
    a = np.zeros((len(segments), len(viewpoints)), dtype=np.int8)
    b = np.zeros((len(segments), len(cameras)), dtype=np.int8)
    vp = np.asarray(viewpoints)
    cam_index = {c: j for j, c in enumerate(cameras)}
    for m, s in enumerate(segments):
        a[m] = (vp >= s.left.view) & (vp < s.right.view)
        for v in (s.left.view, s.right.view):
            if v in cam_index:
                b[m, cam_index[v]] = 1
    return a, b
