"""Integer linear program for representation-set selection, with LP-file export.

Variable naming (stable, all binary):

    alpha_<i>_<c>_<s>_<m>      type i downloads segment m of video c, resolution s
    gamma_<i>_<c>_<s>_<v>_<r>  type i downloads the representation (view v, rate r)
    beta_<c>_<s>_<v>_<r>       the server stores representation (v, r)
    end_<i>_<c>_<s>_<r>        type i decodes the window's right end from the camera
                               there at rate r (only when that end is a camera view)
    out_<i>                    type i gets nothing (satisfaction 0)
    depth_<c>_<v>              view v of video c is stored (only with depth overhead)

``i`` indexes user types, i.e. (class, window) pairs in population order;
``m`` indexes the candidate segments of (c, s) sorted by (left view, right
view, left rate, right rate); ``v`` is a lattice tick and ``r`` a rate in kbps.

The objective is written as a minimization of expected distortion, so the
expected satisfaction equals the total type weight minus the LP objective.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..client import SegmentSums
from ..model import Representation, VideoModel
from ..population import UserClass
from .evaluate import user_types
from .search import _candidates

log = logging.getLogger(__name__)


@dataclass
class Row:
    name: str
    coefs: dict[str, float]
    sense: str  # "<=", ">=" or "="
    rhs: float
    family: str


@dataclass
class IlpModel:
    variables: list[str] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)
    offset: float = 0.0  # total type weight: satisfaction = offset - objective
    beta_reps: dict[str, Representation] = field(default_factory=dict)

    def add_var(self, name: str, cost: float = 0.0) -> str:
        self.variables.append(name)
        if cost:
            self.objective[name] = cost
        return name

    def add_row(self, family: str, name: str, coefs: dict[str, float], sense: str, rhs: float):
        self.rows.append(Row(name, coefs, sense, rhs, family))

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for v in self.variables:
            k = "var_" + v.split("_", 1)[0]
            out[k] = out.get(k, 0) + 1
        for r in self.rows:
            out[r.family] = out.get(r.family, 0) + 1
        return out


def _segments(reps: Sequence[Representation]) -> list[tuple[Representation, Representation]]:
    segs = [(a, b) for a in reps for b in reps if a.view < b.view]
    segs.sort(key=lambda s: (s[0].view, s[1].view, s[0].rate, s[1].rate))
    return segs


def _tag(r: Representation) -> str:
    return f"{r.view}_{r.rate}"


def build_ilp(catalog, population: Sequence[UserClass], storage_budget: float,
              videos: Mapping[str, VideoModel]) -> IlpModel:
    """Build the selection ILP over every candidate segment of every user type."""
    cands = _candidates(catalog, videos)
    model = IlpModel()
    by_cs: dict[tuple[str, str], list[Representation]] = {}
    for r in cands:
        by_cs.setdefault((r.video, r.resolution), []).append(r)
    for key in by_cs:
        by_cs[key].sort(key=lambda r: (r.view, r.rate))

    beta: dict[Representation, str] = {}
    for (c, s), reps in sorted(by_cs.items()):
        for r in reps:
            beta[r] = model.add_var(f"beta_{c}_{s}_{_tag(r)}")
            model.beta_reps[beta[r]] = r
    depth: dict[tuple[str, int], str] = {}
    for (c, s), reps in sorted(by_cs.items()):
        if videos[c].depth_overhead > 0:
            for v in sorted({r.view for r in reps}):
                if (c, v) not in depth:
                    depth[(c, v)] = model.add_var(f"depth_{c}_{v}")

    gammas_of: dict[Representation, list[str]] = {r: [] for r in cands}
    types = user_types(population)
    for i, t in enumerate(types):
        c, s, w = t.video, t.resolution, t.window
        reps = by_cs.get((c, s), [])
        video = videos.get(c)
        model.offset += t.weight
        out = model.add_var(f"out_{i}", t.weight)
        n = len(w)
        gam = {r: model.add_var(f"gamma_{i}_{c}_{s}_{_tag(r)}") for r in reps}
        for r, g in gam.items():
            gammas_of[r].append(g)
        sums = SegmentSums(video, w) if video is not None else None
        alphas: list[tuple[str, Representation, Representation]] = []
        for m, (a, b) in enumerate(_segments(reps)):
            cost = t.weight * sums(a, b) / n
            alphas.append((model.add_var(f"alpha_{i}_{c}_{s}_{m}", cost), a, b))
        ends: dict[Representation, str] = {}
        if video is not None and w.hi in video.cameras:
            for r in reps:
                if r.view == w.hi:
                    cost = t.weight * sums.coding(r.rate) / n
                    ends[r] = model.add_var(f"end_{i}_{c}_{s}_{r.rate}", cost)

        # a segment needs both anchors; the closed end needs its anchor
        for name, a, b in alphas:
            model.add_row("segment_link", f"link_l_{name}", {name: 1, gam[a]: -1}, "<=", 0)
            model.add_row("segment_link", f"link_r_{name}", {name: 1, gam[b]: -1}, "<=", 0)
        for r, e in ends.items():
            coefs = {e: 1.0}
            for name, a, b in alphas:
                if b == r:
                    coefs[name] = coefs.get(name, 0.0) - 1
            model.add_row("segment_link", f"close_{e}", coefs, "<=", 0)
        # a representation is only fetched for some chosen segment
        for r, g in gam.items():
            coefs = {g: 1.0}
            for name, a, b in alphas:
                if r in (a, b):
                    coefs[name] = -1.0
            model.add_row("used", f"used_{g}", coefs, "<=", 0)
        # only stored representations can be fetched
        for r, g in gam.items():
            model.add_row("stored", f"stored_{g}", {g: 1, beta[r]: -1}, "<=", 0)
        # every window viewpoint covered exactly once, or the type is out
        for u in w.points():
            coefs = {out: 1.0}
            for name, a, b in alphas:
                if a.view <= u < b.view:
                    coefs[name] = 1.0
            if u == w.hi:
                coefs.update({e: 1.0 for e in ends.values()})
            model.add_row("cover", f"cover_{i}_{u}", coefs, "=", 1)
        # per-chunk download budget
        model.add_row("bandwidth", f"bw_{i}", {g: float(r.rate) for r, g in gam.items()}, "<=",
                      float(t.budget))

    # a stored representation is fetched by someone
    for r, b in beta.items():
        coefs = {b: 1.0}
        for g in gammas_of[r]:
            coefs[g] = -1.0
        model.add_row("useful", f"useful_{b}", coefs, "<=", 0)
    # storage, with the per-view depth overhead
    coefs = {b: float(r.rate) for r, b in beta.items()}
    for (c, v), d in depth.items():
        coefs[d] = float(videos[c].depth_overhead)
    model.add_row("storage", "storage", coefs, "<=", float(storage_budget))
    for r, b in beta.items():
        if (r.video, r.view) in depth:
            model.add_row("depth", f"view_{b}", {b: 1, depth[(r.video, r.view)]: -1}, "<=", 0)
    return model


def closed_form_counts(catalog, population: Sequence[UserClass],
                       videos: Mapping[str, VideoModel]) -> dict[str, int]:
    """Variable and constraint tallies from the index ranges alone."""
    cands = _candidates(catalog, videos)
    n_cs: dict[tuple[str, str], int] = {}
    views_c: dict[str, set[int]] = {}
    pairs: dict[tuple[str, str], int] = {}
    for r in cands:
        n_cs[(r.video, r.resolution)] = n_cs.get((r.video, r.resolution), 0) + 1
        views_c.setdefault(r.video, set()).add(r.view)
    # segments: ordered pairs with distinct views = (N^2 - sum_v n_v^2) / 2
    for key in n_cs:
        per_view: dict[int, int] = {}
        for r in cands:
            if (r.video, r.resolution) == key:
                per_view[r.view] = per_view.get(r.view, 0) + 1
        pairs[key] = (n_cs[key] ** 2 - sum(k * k for k in per_view.values())) // 2
    types = user_types(population)
    n_alpha = n_gamma = n_end = n_points = 0
    for t in types:
        key = (t.video, t.resolution)
        n_alpha += pairs.get(key, 0)
        n_gamma += n_cs.get(key, 0)
        if t.video in videos and t.window.hi in videos[t.video].cameras:
            n_end += sum(1 for r in cands if (r.video, r.resolution) == key
                         and r.view == t.window.hi)
        n_points += len(t.window)
    n_beta = len(cands)
    n_depth = sum(len(views_c[c]) for c in views_c if videos[c].depth_overhead > 0)
    out = {"var_alpha": n_alpha, "var_gamma": n_gamma, "var_beta": n_beta,
           "var_end": n_end, "var_out": len(types), "var_depth": n_depth,
           "segment_link": 2 * n_alpha + n_end, "used": n_gamma, "stored": n_gamma, "useful": n_beta,
           "cover": n_points, "bandwidth": len(types), "storage": 1,
           "depth": sum(1 for r in cands if videos[r.video].depth_overhead > 0)}
    return {k: v for k, v in out.items() if v}


def _term(coef: float, name: str) -> str:
    sign = "-" if coef < 0 else "+"
    mag = abs(coef)
    return f"{sign} {name}" if mag == 1 else f"{sign} {mag:.17g} {name}"


def _wrap(head: str, terms: list[str], tail: str = "", width: int = 200) -> list[str]:
    lines, cur = [], head
    for t in terms:
        if len(cur) + len(t) + 1 > width:
            lines.append(cur)
            cur = "   "
        cur += " " + t
    if tail:
        if len(cur) + len(tail) + 1 > width:
            lines.append(cur)
            cur = "   "
        cur += " " + tail
    lines.append(cur)
    return lines


def write_lp(model: IlpModel, path: str | Path) -> None:
    """Write ``model`` in the CPLEX LP text format."""
    lines = ["\\ representation-set selection; objective = expected distortion",
             f"\\ expected satisfaction = {model.offset:.17g} - objective",
             "Minimize"]
    terms = [_term(c, v) for v, c in model.objective.items()]
    if not terms and model.variables:
        terms = [f"+ 0 {model.variables[0]}"]
    lines += _wrap(" obj:", terms)
    lines.append("Subject To")
    for row in model.rows:
        terms = [_term(c, v) for v, c in row.coefs.items() if c != 0]
        if not terms:
            continue
        lines += _wrap(f" {row.name}:", terms, f"{row.sense} {row.rhs:.17g}")
    if model.variables:
        lines.append("Binaries")
        lines += _wrap("", model.variables)
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")


def export_ilp(catalog, population: Sequence[UserClass], storage_budget: float,
               videos: Mapping[str, VideoModel], path: str | Path) -> IlpModel:
    model = build_ilp(catalog, population, storage_budget, videos)
    write_lp(model, path)
    log.info("wrote %d variables, %d rows to %s", len(model.variables), len(model.rows), path)
    return model


@dataclass
class MilpResult:
    objective: float  # expected satisfaction
    chosen: frozenset
    status: str
    runtime: float


def solve_milp(model: IlpModel, time_limit: float | None = None) -> MilpResult:
    """Solve the ILP with scipy's HiGHS interface."""
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import coo_matrix

    t0 = time.perf_counter()
    index = {v: k for k, v in enumerate(model.variables)}
    c = np.zeros(len(index))
    for v, coef in model.objective.items():
        c[index[v]] = coef
    rows, cols, vals, lo, hi = [], [], [], [], []
    for k, row in enumerate(model.rows):
        for v, coef in row.coefs.items():
            rows.append(k)
            cols.append(index[v])
            vals.append(coef)
        lo.append(row.rhs if row.sense in ("=", ">=") else -np.inf)
        hi.append(row.rhs if row.sense in ("=", "<=") else np.inf)
    a = coo_matrix((vals, (rows, cols)), shape=(len(model.rows), len(index))).tocsr()
    options = {"time_limit": time_limit} if time_limit else {}
    res = milp(c, constraints=LinearConstraint(a, lo, hi), integrality=np.ones(len(index)),
               bounds=Bounds(0, 1), options=options)
    if res.x is None:
        return MilpResult(float("nan"), frozenset(), res.message, time.perf_counter() - t0)
    chosen = frozenset(r for v, r in model.beta_reps.items() if res.x[index[v]] > 0.5)
    return MilpResult(model.offset - float(res.fun), chosen, res.message,
                      time.perf_counter() - t0)
