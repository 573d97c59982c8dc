"""User population: content choice, focus-of-attention start views, connection classes."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .model import NavigationModel, NavigationWindow, VideoModel
from .client import navigation_window


class ConfigInvalid(ValueError):
    pass


class UnknownScenario(ConfigInvalid):
    pass


@dataclass(frozen=True)
class ConnectionClass:
    name: str
    b_min: float  # Mbps
    b_max: float  # Mbps
    probability: float

    def __post_init__(self):
        if not 0 < self.b_min < self.b_max:
            raise ConfigInvalid(f"{self.name}: need 0 < b_min < b_max")
        if self.probability < 0:
            raise ConfigInvalid(f"{self.name}: negative probability")

    def budget_kbps(self, percentile: float) -> float:
        """Per-chunk download budget at a percentile of ``[2 b_min, 2 b_max]``."""
        lo, hi = 2 * self.b_min, 2 * self.b_max
        return round((lo + percentile / 100.0 * (hi - lo)) * 1000.0, 6)


CONNECTION_CLASSES = (
    ConnectionClass("wifi", 0.4, 4.0, 0.4),
    ConnectionClass("adsl-fast", 0.7, 10.0, 0.3),
    ConnectionClass("ftth", 1.5, 25.0, 0.3),
)


@dataclass(frozen=True)
class UserClass:
    video: str
    resolution: str
    budget: float  # kbps per chunk
    windows: tuple[tuple[NavigationWindow, float], ...]
    fraction: float
    connection: str = ""
    percentile: float = 0.0

    def __post_init__(self):
        total = sum(p for _, p in self.windows)
        if self.windows and abs(total - 1.0) > 1e-9:
            raise ConfigInvalid(f"window probabilities sum to {total}, not 1")

    @property
    def name(self) -> str:
        return f"{self.video}/{self.connection}/p{self.percentile:g}"


@dataclass(frozen=True)
class PopulationConfig:
    connections: tuple[ConnectionClass, ...] = CONNECTION_CLASSES
    video_probs: Mapping[str, float] | None = None
    percentiles: tuple[tuple[float, float], ...] = ((25.0, 0.5), (75.0, 0.5))
    windows_per_class: int = 4
    nav: NavigationModel = field(default_factory=NavigationModel)
    resolution: str = "1080p"
    # camera-label interval shared by every class, or None to sample windows
    fixed_window: tuple[float, float] | None = None
    # focus variances in label units squared, overriding the video's own
    focus_var: Mapping[str, float] | None = None

    def validate(self, videos: Mapping[str, VideoModel]) -> None:
        p_conn = sum(c.probability for c in self.connections)
        if abs(p_conn - 1.0) > 1e-9:
            raise ConfigInvalid(f"connection probabilities sum to {p_conn}")
        p_pct = sum(p for _, p in self.percentiles)
        if abs(p_pct - 1.0) > 1e-9:
            raise ConfigInvalid(f"percentile probabilities sum to {p_pct}")
        if any(not 0 <= q <= 100 for q, _ in self.percentiles):
            raise ConfigInvalid("percentiles must lie in [0, 100]")
        if self.windows_per_class < 1:
            raise ConfigInvalid("windows_per_class must be >= 1")
        if self.video_probs is not None:
            if set(self.video_probs) - set(videos):
                raise ConfigInvalid(f"unknown videos {set(self.video_probs) - set(videos)}")
            if abs(sum(self.video_probs.values()) - 1.0) > 1e-9:
                raise ConfigInvalid("video probabilities must sum to 1")


def scenario_preset(name: str) -> dict:
    """Overrides for :class:`PopulationConfig` reproducing the two named scenarios."""
    if name == "nw-homogeneous":
        return {"fixed_window": (16.0, 52.0)}
    if name == "bw-homogeneous":
        return {"focus_var": {"dancer": 10.0, "shark": 150.0, "hall": 3000.0},
                "connections": (replace(CONNECTION_CLASSES[0], probability=1.0),)}
    raise UnknownScenario(f"unknown scenario {name!r}")


def start_view_distribution(video: VideoModel, focus_var: float | None = None
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian focus of attention over lattice ticks in the camera range.

    ``focus_var`` is in view units squared (defaults to the video's). Returns
    ``(ticks, probabilities)``.
    """
    var = video.focus_var if focus_var is None else focus_var
    if var <= 0:
        raise ConfigInvalid("focus variance must be > 0")
    ticks = np.arange(video.first, video.last + 1)
    x = ticks / video.q_ticks
    logp = -((x - video.focus_mean) ** 2) / (2.0 * var)
    p = np.exp(logp - logp.max())
    return ticks, p / p.sum()


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def build_population(videos: Mapping[str, VideoModel], config: PopulationConfig | None = None,
                     seed: int | np.random.Generator | None = 0) -> list[UserClass]:
    """One class per (video, connection, percentile), with sampled windows."""
    config = config or PopulationConfig()
    config.validate(videos)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    names = sorted(videos) if config.video_probs is None else sorted(config.video_probs)
    vprob = ({n: 1.0 / len(names) for n in names} if config.video_probs is None
             else dict(config.video_probs))
    classes = []
    for vid in names:
        video = videos[vid]
        var = None
        if config.focus_var and vid in config.focus_var:
            var = config.focus_var[vid] / video.label_spacing ** 2
        ticks, probs = start_view_distribution(video, var)
        for conn in config.connections:
            if conn.probability == 0:
                continue
            for pct, p_pct in config.percentiles:
                if config.fixed_window is not None:
                    lo, hi = (video.tick_of_label(x) for x in config.fixed_window)
                    windows = ((NavigationWindow(lo, hi), 1.0),)
                else:
                    windows = _sample_windows(video, config, ticks, probs, rng)
                classes.append(UserClass(
                    video=vid, resolution=config.resolution, budget=conn.budget_kbps(pct),
                    windows=windows, fraction=vprob[vid] * conn.probability * p_pct,
                    connection=conn.name, percentile=pct))
    return classes


def _sample_windows(video, config, ticks, probs, rng) -> tuple[tuple[NavigationWindow, float], ...]:
    k = config.windows_per_class
    starts = rng.choice(ticks, size=k, p=probs)
    merged: dict[NavigationWindow, float] = {}
    for u in starts:
        w = navigation_window(int(u), config.nav, video)
        merged[w] = merged.get(w, 0.0) + 1.0 / k
    return tuple(sorted(merged.items(), key=lambda kv: (kv[0].lo, kv[0].hi)))


def population_manifest(classes: Sequence[UserClass]) -> list[dict]:
    return [{
        "video": c.video, "resolution": c.resolution, "connection": c.connection,
        "percentile": c.percentile, "budget_kbps": c.budget, "fraction": c.fraction,
        "windows": [{"lo": w.lo, "hi": w.hi, "prob": p} for w, p in c.windows],
    } for c in classes]
