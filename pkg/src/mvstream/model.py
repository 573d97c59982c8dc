"""Domain types and closed-form distortion models.

Viewpoints live on an integer lattice: ``q_ticks`` ticks per gap between
adjacent cameras. Distances fed to the synthesis model are expressed in
view units (one camera gap = 1.0), so ``xi`` is per camera gap.

Distortions are VQM-like scores in [0, 1]; satisfaction is ``1 - distortion``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Literal, Mapping, Sequence


class ModelError(ValueError):
    """Base class for invalid model inputs."""


class RateOutOfDomain(ModelError):
    pass


class ViewOrderViolation(ModelError):
    pass


class EmptyIntersection(ModelError):
    pass


class QualityClampWarning(RuntimeWarning):
    """Fitted quality curve left [0, 1] and was clamped."""


@dataclass(frozen=True)
class VideoModel:
    """Content parameters of one multi-view video.

    ``cameras`` are lattice ticks; ``focus_mean``/``focus_var`` are in view
    units. ``label_spacing`` maps view units back to the camera labels used
    in configs (e.g. 8 for labels 0, 8, ..., 72).
    """

    id: str
    cameras: tuple[int, ...]
    fit_a: float
    fit_b: float
    fit_e: float
    xi: float
    d_inpaint: float
    focus_mean: float
    focus_var: float
    q_ticks: int = 4
    depth_overhead: float = 0.0
    label_spacing: float = 1.0

    def __post_init__(self):
        cams = tuple(int(c) for c in self.cameras)
        object.__setattr__(self, "cameras", cams)
        if len(cams) < 2:
            raise ModelError(f"{self.id}: need at least two cameras")
        if any(b <= a for a, b in zip(cams, cams[1:])):
            raise ModelError(f"{self.id}: cameras must be strictly increasing")
        if cams[0] < 0:
            raise ModelError(f"{self.id}: negative viewpoint tick")
        if self.q_ticks < 1:
            raise ModelError("q_ticks must be >= 1")
        if self.xi < 0:
            raise ModelError("xi must be >= 0")
        if not 0.0 <= self.d_inpaint <= 1.0:
            raise ModelError("d_inpaint must lie in [0, 1]")
        if self.focus_var <= 0:
            raise ModelError("focus_var must be > 0")
        if self.depth_overhead < 0:
            raise ModelError("depth_overhead must be >= 0")

    @property
    def first(self) -> int:
        return self.cameras[0]

    @property
    def last(self) -> int:
        return self.cameras[-1]

    def to_view_units(self, ticks: float) -> float:
        return ticks / self.q_ticks

    def tick_of_label(self, label: float) -> int:
        t = label * self.q_ticks / self.label_spacing
        if abs(t - round(t)) > 1e-9:
            raise ModelError(f"label {label} does not fall on the viewpoint lattice")
        return int(round(t))

    def label_of_tick(self, tick: int) -> float:
        return tick * self.label_spacing / self.q_ticks

    def admissible(self, rate: float) -> bool:
        """Rate lies where the fitted curve is defined and inside [0, 1]."""
        den = rate + self.fit_e
        if den <= 0:
            return False
        q = self.fit_a - self.fit_b / den
        return 0.0 <= q <= 1.0


@dataclass(frozen=True, order=True)
class Representation:
    """One encoding of a camera view. ``view`` in ticks, ``rate`` in kbps."""

    video: str
    view: int
    rate: int
    resolution: str = "1080p"

    def __post_init__(self):
        if self.rate <= 0:
            raise ModelError(f"rate must be positive, got {self.rate}")

    def key(self) -> tuple:
        return (self.video, self.resolution, self.view, self.rate)


@dataclass(frozen=True)
class NavigationWindow:
    """Closed interval of displayable viewpoints, in ticks."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ModelError(f"empty window [{self.lo}, {self.hi}]")

    def points(self) -> range:
        return range(self.lo, self.hi + 1)

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    def __contains__(self, u: int) -> bool:
        return self.lo <= u <= self.hi


@dataclass(frozen=True)
class NavigationModel:
    """Navigation speed ``rho`` (view units / s) and chunk length (s).

    ``q_ticks`` of None means the lattice resolution of the video is used.
    """

    rho: float = 1.0
    chunk_seconds: float = 2.0
    q_ticks: int | None = None

    def __post_init__(self):
        if self.rho < 0:
            raise ModelError("rho must be >= 0")
        if self.chunk_seconds <= 0:
            raise ModelError("chunk_seconds must be > 0")
        if self.q_ticks is not None and self.q_ticks < 1:
            raise ModelError("q_ticks must be >= 1")

    def reach_ticks(self, video: VideoModel) -> int:
        q = self.q_ticks or video.q_ticks
        if q != video.q_ticks:
            raise ModelError(f"navigation lattice Q={q} differs from video Q={video.q_ticks}")
        return int(math.floor(self.rho * self.chunk_seconds * q + 1e-9))


@dataclass(frozen=True)
class RepresentationSet:
    """Representations stored at the origin server.

    ``storage_cost`` is the sum of rates plus one depth overhead per distinct
    stored (video, view).
    """

    reps: frozenset[Representation]
    storage_cost: float = 0.0

    @classmethod
    def build(cls, reps: Iterable[Representation],
              videos: Mapping[str, VideoModel] | None = None) -> "RepresentationSet":
        reps = frozenset(reps)
        return cls(reps, storage_cost(reps, videos))

    def __len__(self) -> int:
        return len(self.reps)

    def __iter__(self):
        return iter(sorted(self.reps, key=Representation.key))

    def __contains__(self, rep) -> bool:
        return rep in self.reps

    def for_video(self, video: str, resolution: str | None = None) -> list[Representation]:
        return [r for r in self if r.video == video
                and (resolution is None or r.resolution == resolution)]

    def views(self, video: str) -> list[int]:
        return sorted({r.view for r in self.reps if r.video == video})


def storage_cost(reps: Iterable[Representation],
                 videos: Mapping[str, VideoModel] | None = None) -> float:
    reps = list(reps)
    total = float(sum(r.rate for r in reps))
    if videos:
        for vid, view in {(r.video, r.view) for r in reps}:
            model = videos.get(vid)
            if model is not None:
                total += model.depth_overhead
    return total


# -- Rate-distortion model ---------------------------------------------------

def coding_quality(video: VideoModel, rate: float) -> float:
    den = rate + video.fit_e
    if den <= 0:
        raise RateOutOfDomain(f"{video.id}: rate {rate} kbps outside fit domain (e={video.fit_e})")
    q = video.fit_a - video.fit_b / den
    if q < 0.0 or q > 1.0:
        warnings.warn(f"{video.id}: quality {q:.6f} at {rate} kbps clamped to [0, 1]",
                      QualityClampWarning, stacklevel=2)
        q = min(1.0, max(0.0, q))
    return q


def coding_distortion(video: VideoModel, rate: float) -> float:
    return 1.0 - coding_quality(video, rate)


def synth_weights(xi: float, dist_min: float, dist_max: float) -> tuple[float, float, float]:
    """Weights on (D_min, D_max, D_I) for view-unit distances to both anchors."""
    alpha = math.exp(-xi * dist_min)
    beta = math.exp(-xi * dist_max)
    w_min = alpha
    w_max = (1.0 - alpha) * beta
    return w_min, w_max, 1.0 - alpha - w_max


def synth_distortion(video: VideoModel, u: int, left: Representation,
                     right: Representation) -> float:
    """Distortion of viewpoint ``u`` rendered from the anchor pair."""
    if not left.view < right.view:
        raise ViewOrderViolation(f"left anchor {left.view} not before right anchor {right.view}")
    if not left.view <= u <= right.view:
        raise ViewOrderViolation(f"viewpoint {u} outside [{left.view}, {right.view}]")
    d_left = coding_distortion(video, left.rate)
    d_right = coding_distortion(video, right.rate)
    return _synth(video, u, left.view, d_left, right.view, d_right)


def _synth(video: VideoModel, u: int, v_left: int, d_left: float,
           v_right: int, d_right: float) -> float:
    if d_left <= d_right:
        d_min, v_min, d_max, v_max = d_left, v_left, d_right, v_right
    else:
        d_min, v_min, d_max, v_max = d_right, v_right, d_left, v_left
    q = video.q_ticks
    w_min, w_max, w_inp = synth_weights(video.xi, abs(u - v_min) / q, abs(u - v_max) / q)
    return w_min * d_min + w_max * d_max + w_inp * video.d_inpaint


Normalization = Literal["segment-verbatim", "intersection"]


def segment_distortion(seg, w: NavigationWindow, video: VideoModel,
                       normalization: Normalization = "segment-verbatim") -> float:
    """Mean synthesized distortion of a navigation segment over a window.

    The sum runs over lattice viewpoints of ``[left.view, right.view)`` that
    fall in ``w``; ``segment-verbatim`` divides by the segment's viewpoint
    count, ``intersection`` by the number of summed viewpoints.
    """
    v_l, v_r = seg.left.view, seg.right.view
    pts = range(max(v_l, w.lo), min(v_r, w.hi + 1))
    if len(pts) == 0:
        raise EmptyIntersection(f"segment [{v_l}, {v_r}) misses window [{w.lo}, {w.hi}]")
    d_l = coding_distortion(video, seg.left.rate)
    d_r = coding_distortion(video, seg.right.rate)
    total = sum(_synth(video, u, v_l, d_l, v_r, d_r) for u in pts)
    if normalization == "segment-verbatim":
        return total / (v_r - v_l)
    if normalization == "intersection":
        return total / len(pts)
    raise ValueError(f"unknown normalization {normalization!r}")


def segment_satisfaction(seg, w: NavigationWindow, video: VideoModel,
                         normalization: Normalization = "segment-verbatim") -> float:
    return 1.0 - segment_distortion(seg, w, video, normalization)


# -- Presets -----------------------------------------------------------------

# (a, b, e, xi); D_I = 0.35 for all three.
CONTENT_PRESETS: dict[str, tuple[float, float, float, float]] = {
    "shark": (1.0, 46.67, -95.40, 0.52),
    "dancer": (0.98, 364.45, 868.08, 0.35),
    "hall": (0.98, 83.57, 67.35, 1.32),
}
D_INPAINT = 0.35
CAMERA_LABELS = tuple(range(0, 73, 8))
LABEL_SPACING = 8.0
# focus-of-attention variances, in camera-label units squared
FOCUS_VARIANCE = {"dancer": 80.0, "shark": 250.0, "hall": 3000.0}
FOCUS_VARIANCE_BW_HOMOGENEOUS = {"dancer": 10.0, "shark": 150.0, "hall": 3000.0}


def make_video(name: str, *, labels: Sequence[float] = CAMERA_LABELS,
               label_spacing: float = LABEL_SPACING, q_ticks: int = 4,
               focus_var_labels: float | None = None, focus_mean_labels: float | None = None,
               depth_overhead: float = 0.0, **overrides) -> VideoModel:
    """Build a preset video on the lattice implied by ``labels``.

    Focus parameters are given in label units and converted to view units;
    the mean defaults to the middle of the camera range.
    """
    a, b, e, xi = CONTENT_PRESETS[name] if name in CONTENT_PRESETS else (None,) * 4
    params = dict(fit_a=a, fit_b=b, fit_e=e, xi=xi, d_inpaint=D_INPAINT)
    params.update(overrides)
    if any(v is None for v in params.values()):
        raise ModelError(f"unknown preset {name!r} and incomplete overrides")
    scale = q_ticks / label_spacing
    cameras = []
    for lab in labels:
        t = lab * scale
        if abs(t - round(t)) > 1e-9:
            raise ModelError(f"camera label {lab} off the lattice")
        cameras.append(int(round(t)))
    if focus_mean_labels is None:
        focus_mean_labels = (labels[0] + labels[-1]) / 2.0
    if focus_var_labels is None:
        focus_var_labels = FOCUS_VARIANCE.get(name, 250.0)
    return VideoModel(
        id=params.pop("id", name),
        cameras=tuple(cameras),
        q_ticks=q_ticks,
        focus_mean=focus_mean_labels / label_spacing,
        focus_var=focus_var_labels / label_spacing ** 2,
        depth_overhead=depth_overhead,
        label_spacing=label_spacing,
        **params,
    )


def preset_videos(q_ticks: int = 4, variances: Mapping[str, float] | None = None,
                 depth_overhead: float = 0.0) -> dict[str, VideoModel]:
    variances = variances or FOCUS_VARIANCE
    return {n: make_video(n, q_ticks=q_ticks, focus_var_labels=variances[n],
                          depth_overhead=depth_overhead)
            for n in ("dancer", "shark", "hall")}
