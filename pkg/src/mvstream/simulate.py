"""Per-user streaming sessions: channel, navigation and per-chunk adaptation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .client import Infeasible, UnspannableWindow, best_chain_dp, navigation_window
from .model import ModelError, NavigationModel, NavigationWindow, RepresentationSet, VideoModel
from .population import CONNECTION_CLASSES, start_view_distribution


class TraceExhausted(IndexError):
    pass


@dataclass(frozen=True)
class ChannelProcess:
    """Channel bandwidth per slot, in kbps.

    ``staircase`` holds each level for ``dwell`` slots and then wraps around;
    ``markov`` walks ``levels`` with ``transition``; ``trace`` replays ``levels``.
    """

    kind: str
    levels: tuple[float, ...]
    dwell: int = 5
    transition: tuple[tuple[float, ...], ...] | None = None
    initial: int = 0

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))
        if self.kind not in ("staircase", "markov", "trace"):
            raise ModelError(f"unknown channel kind {self.kind!r}")
        if not self.levels or min(self.levels) <= 0:
            raise ModelError("channel levels must be > 0")
        if self.kind == "staircase" and self.dwell < 1:
            raise ModelError("dwell must be >= 1")
        if self.kind == "markov":
            p = np.asarray(self.transition, dtype=float)
            if p.shape != (len(self.levels),) * 2:
                raise ModelError("transition matrix shape does not match levels")
            if (p < 0).any() or not np.allclose(p.sum(axis=1), 1.0, atol=1e-9):
                raise ModelError("transition rows must be distributions")
            if not 0 <= self.initial < len(self.levels):
                raise ModelError("initial state out of range")


def staircase(levels_kbps: Sequence[float] = (2000, 4000, 6000), dwell: int = 5) -> ChannelProcess:
    return ChannelProcess("staircase", tuple(levels_kbps), dwell=dwell)


def default_markov(stay: float = 0.8) -> ChannelProcess:
    """Three states at the midpoints of the connection ranges, sticky with neighbour moves."""
    levels = tuple(1000.0 * (c.b_min + c.b_max) / 2 for c in CONNECTION_CLASSES)
    move = (1.0 - stay) / 2
    p = [[stay, 2 * move, 0.0], [move, stay, move], [0.0, 2 * move, stay]]
    return ChannelProcess("markov", levels, transition=tuple(map(tuple, p)), initial=1)


@dataclass(frozen=True)
class ChannelState:
    slot: int
    markov: int = 0


def initial_state(process: ChannelProcess) -> ChannelState:
    return ChannelState(0, process.initial)


def channel_step(process: ChannelProcess, state: ChannelState,
                 rng: np.random.Generator) -> tuple[float, ChannelState]:
    """Bandwidth of the current slot and the state for the next one."""
    if state.slot < 0:
        raise ModelError("negative slot")
    if process.kind == "staircase":
        k = (state.slot // process.dwell) % len(process.levels)
        return process.levels[k], ChannelState(state.slot + 1)
    if process.kind == "trace":
        if state.slot >= len(process.levels):
            raise TraceExhausted(f"trace has {len(process.levels)} slots, asked for {state.slot}")
        return process.levels[state.slot], ChannelState(state.slot + 1)
    row = process.transition[state.markov]
    nxt = int(rng.choice(len(row), p=row))
    return process.levels[state.markov], ChannelState(state.slot + 1, nxt)


def navigation_step(u: int, window: NavigationWindow, nav: NavigationModel, video: VideoModel,
                    focus: tuple[np.ndarray, np.ndarray], rng: np.random.Generator,
                    bias: float = 1.0) -> int:
    """Next start viewpoint of a random walk pulled toward the focus of attention.

    Steps of up to the per-chunk reach are weighted by ``density(dest) ** bias``
    (``bias = 0`` gives a symmetric walk); the destination is clamped to the
    camera range and to the window just downloaded.
    """
    if not video.first <= u <= video.last:
        raise ModelError(f"viewpoint {u} outside camera range")
    reach = nav.reach_ticks(video)
    if reach == 0:
        return u
    lo, hi = max(video.first, window.lo), min(video.last, window.hi)
    dests = np.clip(np.arange(u - reach, u + reach + 1), lo, hi)
    ticks, probs = focus
    dens = np.interp(dests, ticks, probs)
    logw = bias * np.log(np.maximum(dens, 1e-300))
    w = np.exp(logw - logw.max())
    return int(dests[rng.choice(len(dests), p=w / w.sum())])


@dataclass(frozen=True)
class SessionUser:
    user_id: int
    video: str
    resolution: str = "1080p"
    start: int | None = None
    label: str = ""


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    u: int
    lo: int
    hi: int
    channel_kbps: float
    budget: float
    cost: float
    satisfaction: float
    status: str  # ok | infeasible | unspannable


@dataclass
class SessionTrace:
    user: SessionUser
    repetition: int
    records: list[SlotRecord] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean([r.satisfaction for r in self.records]))

    @property
    def stalls(self) -> int:
        return sum(r.status != "ok" for r in self.records)


def run_session(user: SessionUser, stored: RepresentationSet, videos: Mapping[str, VideoModel],
                horizon: int, seed: int | Sequence[int] | np.random.SeedSequence,
                channel: ChannelProcess, nav: NavigationModel | None = None,
                bias: float = 1.0, focus_var: float | None = None,
                repetition: int = 0, region: NavigationWindow | None = None) -> SessionTrace:
    """Simulate one user for ``horizon`` chunks against a stored set.

    With a ``region`` the user starts inside it and every navigation window
    is clipped to it, as when all users share one window of interest.

    The channel and the navigation draw from separate streams, so two stored
    sets simulated with the same seed see the same bandwidth and the same
    start viewpoints whenever their downloaded windows agree.
    """
    if horizon < 1:
        raise ModelError("horizon must be >= 1")
    video = videos[user.video]
    nav = nav or NavigationModel()
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    ch_rng, nav_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    focus = start_view_distribution(video, focus_var)
    if region is not None:
        inside = (focus[0] >= region.lo) & (focus[0] <= region.hi)
        if not inside.any():
            raise ModelError(f"region [{region.lo}, {region.hi}] outside the camera range")
        focus = (focus[0][inside], focus[1][inside] / focus[1][inside].sum())
    u = user.start
    if u is None:
        u = int(nav_rng.choice(focus[0], p=focus[1]))
    state = initial_state(channel)
    trace = SessionTrace(user, repetition)
    for slot in range(horizon):
        kbps, state = channel_step(channel, state, ch_rng)
        budget = kbps * nav.chunk_seconds
        w = navigation_window(u, nav, video)
        if region is not None:
            w = NavigationWindow(max(w.lo, region.lo), min(w.hi, region.hi))
        try:
            res = best_chain_dp(w, stored, budget, video, user.resolution)
            rec = SlotRecord(slot, u, w.lo, w.hi, kbps, budget, res.cost, res.satisfaction, "ok")
        except Infeasible:
            rec = SlotRecord(slot, u, w.lo, w.hi, kbps, budget, 0.0, 0.0, "infeasible")
        except UnspannableWindow:
            rec = SlotRecord(slot, u, w.lo, w.hi, kbps, budget, 0.0, 0.0, "unspannable")
        trace.records.append(rec)
        u = navigation_step(u, w, nav, video, focus, nav_rng, bias)
    return trace


def session_seed(seed: int, repetition: int, user_id: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, repetition, user_id])


def run_population(users: Sequence[SessionUser], stored: RepresentationSet,
                   videos: Mapping[str, VideoModel], horizon: int, repetitions: int, seed: int,
                   channel: ChannelProcess, nav: NavigationModel | None = None,
                   bias: float = 1.0, focus_var: Mapping[str, float] | None = None,
                   regions: Mapping[str, NavigationWindow] | None = None
                   ) -> list[SessionTrace]:
    out = []
    for rep in range(repetitions):
        for user in users:
            var = focus_var.get(user.video) if focus_var else None
            region = regions.get(user.video) if regions else None
            out.append(run_session(user, stored, videos, horizon, session_seed(seed, rep, user.user_id),
                                   channel, nav, bias, var, rep, region))
    return out


def make_users(videos: Mapping[str, VideoModel], n: int, seed: int,
               video_probs: Mapping[str, float] | None = None,
               resolution: str = "1080p") -> list[SessionUser]:
    """``n`` users with videos drawn from ``video_probs`` (uniform by default), ordered by video."""
    names = sorted(video_probs or videos)
    p = np.array([video_probs[v] for v in names]) if video_probs else np.ones(len(names))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5E55]))
    picks = rng.choice(len(names), size=n, p=p / p.sum())
    picks.sort(kind="stable")
    return [SessionUser(k, names[j], resolution, label=names[j]) for k, j in enumerate(picks)]


def _ci(values: Iterable[float], level: float = 0.95) -> tuple[float, float]:
    x = np.asarray(list(values), dtype=float)
    if len(x) < 2:
        return float(x.mean()), 0.0
    half = stats.t.ppf(0.5 + level / 2, len(x) - 1) * x.std(ddof=1) / math.sqrt(len(x))
    return float(x.mean()), float(half)


@dataclass
class Aggregate:
    per_user: dict[int, float]
    per_class: dict[str, float]
    population: float
    population_ci: float  # half-width over repetitions
    per_slot: list[float]
    per_repetition: list[float]
    stall_fraction: float


def aggregate(traces: Sequence[SessionTrace], level: float = 0.95) -> Aggregate:
    """Time means per user, class means, population mean with a CI over repetitions."""
    if not traces:
        raise ModelError("nothing to aggregate")
    by_user: dict[int, list[float]] = {}
    by_class: dict[str, list[float]] = {}
    by_rep: dict[int, list[float]] = {}
    horizon = max(len(t.records) for t in traces)
    slot_sum = np.zeros(horizon)
    slot_n = np.zeros(horizon)
    for t in traces:
        m = t.mean
        by_user.setdefault(t.user.user_id, []).append(m)
        by_class.setdefault(t.user.label or t.user.video, []).append(m)
        by_rep.setdefault(t.repetition, []).append(m)
        for r in t.records:
            slot_sum[r.slot] += r.satisfaction
            slot_n[r.slot] += 1
    reps = [float(np.mean(v)) for _, v in sorted(by_rep.items())]
    mean, half = _ci(reps, level)
    stalls = sum(t.stalls for t in traces) / sum(len(t.records) for t in traces)
    return Aggregate(
        per_user={k: float(np.mean(v)) for k, v in sorted(by_user.items())},
        per_class={k: float(np.mean(v)) for k, v in sorted(by_class.items())},
        population=mean, population_ci=half,
        per_slot=list(slot_sum / np.maximum(slot_n, 1)),
        per_repetition=reps, stall_fraction=stalls)


def paired_difference(a: Sequence[SessionTrace], b: Sequence[SessionTrace],
                      level: float = 0.95) -> tuple[float, float]:
    """Mean and CI half-width of the per-repetition population-mean difference ``a - b``."""
    ra, rb = aggregate(a).per_repetition, aggregate(b).per_repetition
    if len(ra) != len(rb):
        raise ModelError("traces come from different repetition counts")
    return _ci(np.subtract(ra, rb), level)
