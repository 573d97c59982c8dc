"""Run configuration: one YAML file, validated before anything runs.

Rates, budgets and channel levels are written in Mbps and converted to kbps
here; everything downstream works in kbps.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .model import (CONTENT_PRESETS, D_INPAINT, FOCUS_VARIANCE, ModelError, NavigationModel,
                    VideoModel, make_video)
from .optimizer.evaluate import CandidateLadder
from .population import (ConfigInvalid, ConnectionClass, PopulationConfig, CONNECTION_CLASSES,
                         scenario_preset)
from .simulate import ChannelProcess


def kbps(mbps: float) -> float:
    return round(float(mbps) * 1000.0, 6)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class VideoSpec(_Strict):
    preset: str | None = None  # one of the content presets, or None with all fit fields
    fit_a: float | None = None
    fit_b: float | None = None
    fit_e: float | None = None
    xi: float | None = None
    d_inpaint: float = D_INPAINT
    focus_var: float | None = None  # label units squared
    focus_mean: float | None = None  # camera label; default mid-range


class VideosConfig(_Strict):
    q_ticks: int = Field(2, ge=1)
    labels: list[float] = [float(x) for x in range(0, 73, 8)]
    label_spacing: float = 8.0
    depth_overhead_mbps: float = Field(0.0, ge=0)
    items: dict[str, VideoSpec] = {n: VideoSpec(preset=n) for n in ("dancer", "shark", "hall")}

    def build(self) -> dict[str, VideoModel]:
        out = {}
        for name, spec in self.items.items():
            preset = spec.preset or name
            fit = dict(zip(("fit_a", "fit_b", "fit_e", "xi"), CONTENT_PRESETS.get(preset, (None,) * 4)))
            for k in fit:
                if getattr(spec, k) is not None:
                    fit[k] = getattr(spec, k)
            if any(v is None for v in fit.values()):
                raise ConfigInvalid(f"video {name!r}: unknown preset and incomplete fit parameters")
            var = spec.focus_var if spec.focus_var is not None else FOCUS_VARIANCE.get(preset, 250.0)
            out[name] = make_video(
                "custom", id=name, labels=tuple(self.labels), label_spacing=self.label_spacing,
                q_ticks=self.q_ticks, focus_var_labels=var, focus_mean_labels=spec.focus_mean,
                depth_overhead=kbps(self.depth_overhead_mbps), d_inpaint=spec.d_inpaint, **fit)
        return out


class ConnectionSpec(_Strict):
    name: str
    b_min_mbps: float
    b_max_mbps: float
    probability: float


class PopulationSpec(_Strict):
    scenario: Literal["nw-homogeneous", "bw-homogeneous"] | None = None
    connections: list[ConnectionSpec] | None = None  # default: the three connection classes
    percentiles: list[tuple[float, float]] = [(25.0, 0.5), (75.0, 0.5)]
    windows_per_class: int = 4
    video_probs: dict[str, float] | None = None
    fixed_window: tuple[float, float] | None = None  # camera labels
    focus_var: dict[str, float] | None = None  # label units squared
    rho: float = 1.0
    chunk_seconds: float = 2.0
    resolution: str = "1080p"

    def build(self) -> PopulationConfig:
        fields = {}
        if self.scenario:
            fields.update(scenario_preset(self.scenario))
        if self.connections is not None:
            fields["connections"] = tuple(ConnectionClass(c.name, c.b_min_mbps, c.b_max_mbps,
                                                          c.probability) for c in self.connections)
        if self.fixed_window is not None:
            fields["fixed_window"] = tuple(self.fixed_window)
        if self.focus_var is not None:
            fields["focus_var"] = dict(self.focus_var)
        return PopulationConfig(
            connections=fields.get("connections", CONNECTION_CLASSES),
            video_probs=self.video_probs,
            percentiles=tuple(tuple(p) for p in self.percentiles),
            windows_per_class=self.windows_per_class,
            nav=NavigationModel(rho=self.rho, chunk_seconds=self.chunk_seconds),
            resolution=self.resolution,
            fixed_window=fields.get("fixed_window"),
            focus_var=fields.get("focus_var"))


class SolverSpec(_Strict):
    node_limit: int = Field(10_000_000, ge=1)
    workers: int = Field(1, ge=1)


class BaselineSpec(_Strict):
    providers: list[Literal["apple", "netflix", "youtube"]] = ["apple", "netflix", "youtube"]
    pa_spacings: list[float] = [8.0, 16.0]  # camera-label units


class ChannelSpec(_Strict):
    kind: Literal["staircase", "markov", "trace"] = "staircase"
    levels_mbps: list[float] = [2.0, 4.0, 6.0]
    dwell: int = 5
    transition: list[list[float]] | None = None
    initial: int = 0

    def build(self) -> ChannelProcess:
        tr = tuple(tuple(r) for r in self.transition) if self.transition else None
        return ChannelProcess(self.kind, tuple(kbps(x) for x in self.levels_mbps),
                              dwell=self.dwell, transition=tr, initial=self.initial)


class SimulationSpec(_Strict):
    users: int = Field(12, ge=1)
    horizon: int = Field(30, ge=1)
    repetitions: int = Field(20, ge=1)
    bias: float = Field(1.0, ge=0)
    channel: ChannelSpec = ChannelSpec()
    # storage budget of the optimized set; default is the largest budget
    budget_mbps: float | None = None
    # named set sources: "optimized", a provider name, "pa-<spacing>" or a set CSV path
    sets: list[str] = ["optimized", "youtube"]


class GapSpec(_Strict):
    instances: int = Field(500, ge=1)
    max_cameras: int = Field(4, ge=2)
    max_rates: int = Field(2, ge=1)
    max_q: int = Field(4, ge=1)


class RunConfig(_Strict):
    seed: int = 0
    out: str = "runs/default"
    videos: VideosConfig = VideosConfig()
    population: PopulationSpec = PopulationSpec(scenario="nw-homogeneous")
    ladder_mbps: list[float] = [0.3, 0.6, 1.0, 2.0, 4.0]
    resolutions: list[str] = ["1080p"]
    budgets_mbps: list[float] = [3.0, 6.0, 15.0]
    solver: SolverSpec = SolverSpec()
    baselines: BaselineSpec = BaselineSpec()
    simulation: SimulationSpec = SimulationSpec()
    gap_study: GapSpec = GapSpec()

    @field_validator("budgets_mbps")
    @classmethod
    def _positive(cls, v):
        if not v or min(v) <= 0:
            raise ValueError("storage budgets must be a nonempty list of positive values")
        return sorted(v)

    @model_validator(mode="after")
    def _refs(self):
        if self.population.video_probs and set(self.population.video_probs) - set(self.videos.items):
            raise ValueError("population.video_probs names unknown videos")
        return self

    def ladder(self) -> CandidateLadder:
        return CandidateLadder(tuple(int(round(kbps(r))) for r in self.ladder_mbps),
                               resolutions=tuple(self.resolutions))

    def budgets(self) -> list[float]:
        return [kbps(b) for b in self.budgets_mbps]

    def digest(self) -> str:
        """Hash of everything that affects results; the output directory does not."""
        blob = json.dumps(self.model_dump(mode="json", exclude={"out"}), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path: str | Path | None, **overrides) -> RunConfig:
    """Parse and validate; ``overrides`` are top-level keys applied on top."""
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid("config root must be a mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = RunConfig.model_validate(data)
        videos = cfg.videos.build()
        pop = cfg.population.build()
        if pop.fixed_window is not None:
            for video in videos.values():
                for label in pop.fixed_window:
                    video.tick_of_label(label)
        cfg.simulation.channel.build()
        cfg.ladder()
    except (ValidationError, ModelError) as exc:
        raise ConfigInvalid(str(exc)) from exc
    return cfg
