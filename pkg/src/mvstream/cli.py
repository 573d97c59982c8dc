"""Command-line entry point: optimize, simulate, compare, export-ilp, gap-study.

Every command writes tidy CSVs and a ``manifest.json`` (config digest, seed,
package versions) into the output directory. Log verbosity comes from the
``MVSTREAM_LOG`` environment variable (default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .config import ConfigInvalid, RunConfig, kbps, load_config
from .model import (ModelError, NavigationWindow, Representation, RepresentationSet,
                    VideoModel)
from .optimizer import (OptimizationReport, expected_satisfaction, export_ilp,
                        gap_study, optimize_sweep, pa_sweep, recommended_set, zero_gap_fraction)
from .optimizer.baselines import PROVIDER_LADDERS
from .population import UserClass, build_population, population_manifest
from .simulate import aggregate, make_users, paired_difference, run_population

log = logging.getLogger("mvstream")

SET_COLUMNS = ("video", "view_tick", "view_label", "rate_kbps", "resolution")


class MissingSetFile(FileNotFoundError):
    pass


# -- IO helpers ----------------------------------------------------------------

def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def write_set(path: Path, reps: RepresentationSet, videos: Mapping[str, VideoModel]) -> Path:
    return write_csv(path, SET_COLUMNS, [
        (r.video, r.view, f"{videos[r.video].label_of_tick(r.view):g}", r.rate, r.resolution)
        for r in reps])


def read_set(path: str | Path, videos: Mapping[str, VideoModel]) -> RepresentationSet:
    p = Path(path)
    if not p.is_file():
        raise MissingSetFile(f"set file {p} not found")
    with p.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(SET_COLUMNS) - set(rows[0]):
        raise ConfigInvalid(f"{p}: expected columns {', '.join(SET_COLUMNS)}")
    reps = []
    for row in rows:
        if row["video"] not in videos:
            raise ConfigInvalid(f"{p}: unknown video {row['video']!r}")
        reps.append(Representation(row["video"], int(row["view_tick"]), int(row["rate_kbps"]),
                                   row["resolution"]))
    return RepresentationSet.build(reps, videos)


def _versions() -> dict:
    out = {"python": platform.python_version(), "mvstream": __version__}
    for pkg in ("numpy", "scipy", "numba", "pydantic", "pyyaml"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def write_manifest(out: Path, command: str, cfg: RunConfig, outputs: Sequence[Path],
                   extra: dict | None = None) -> Path:
    doc = {
        "command": command,
        "argv": sys.argv[1:],
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "config": cfg.model_dump(mode="json"),
        "versions": _versions(),
        "outputs": sorted(str(p.relative_to(out)) for p in outputs),
    }
    doc.update(extra or {})
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


# -- Shared setup --------------------------------------------------------------

def _setup(cfg: RunConfig) -> tuple[dict[str, VideoModel], list[UserClass]]:
    videos = cfg.videos.build()
    population = build_population(videos, cfg.population.build(), seed=cfg.seed)
    return videos, population


def _label(budget: float) -> str:
    return f"{budget / 1000:g}mbps"


def _cumulative_rows(method: str, budget, reps: RepresentationSet,
                     videos: Mapping[str, VideoModel]):
    for vid in sorted(videos):
        video = videos[vid]
        total = 0
        for cam in video.cameras:
            total += sum(r.rate for r in reps.for_video(vid) if r.view == cam)
            yield (method, budget, vid, f"{video.label_of_tick(cam):g}", total)


def _report_rows(rep: OptimizationReport):
    return (rep.method, rep.storage_budget, rep.storage, f"{rep.objective:.12f}",
            int(rep.optimal), f"{rep.gap:.12f}", rep.nodes, f"{rep.runtime:.3f}")


SWEEP_COLUMNS = ("method", "budget_kbps", "storage_kbps", "objective", "optimal", "gap",
                 "nodes", "seconds")


# -- Commands ------------------------------------------------------------------

def cmd_optimize(cfg: RunConfig, out: Path, baselines: bool = False) -> list[Path]:
    videos, population = _setup(cfg)
    budgets = cfg.budgets()
    ladder = cfg.ladder()
    reports = optimize_sweep(ladder, population, budgets, videos, cfg.solver.node_limit,
                             workers=cfg.solver.workers)
    for rep in reports:
        log.info("budget %.0f: objective %.6f (optimal=%s)", rep.storage_budget, rep.objective,
                 rep.optimal)
    extra_rows = []
    if baselines:
        for spacing in cfg.baselines.pa_spacings:
            reports += pa_sweep(ladder, population, budgets, videos, spacing,
                                cfg.solver.node_limit, cfg.solver.workers)
        for prov in cfg.baselines.providers:
            t0 = time.perf_counter()
            rs = recommended_set(prov, videos, population, resolution=cfg.population.resolution)
            value = expected_satisfaction(rs, population, videos)
            extra_rows.append((prov, rs, value, time.perf_counter() - t0))
    outputs = []
    sweep_rows = [_report_rows(r) for r in reports]
    sweep_rows += [(prov, "", rs.storage_cost, f"{v:.12f}", 1, f"{0:.12f}", 0, f"{t:.3f}")
                   for prov, rs, v, t in extra_rows]
    outputs.append(write_csv(out / "sweep.csv", SWEEP_COLUMNS, sweep_rows))
    per_video, cum = [], []
    for rep in reports:
        per_video += [(rep.method, rep.storage_budget, vid, f"{v:.12f}")
                      for vid, v in sorted(rep.per_video.items())]
        cum += _cumulative_rows(rep.method, rep.storage_budget, rep.chosen, videos)
        outputs.append(write_set(out / "sets" / f"{rep.method}_{_label(rep.storage_budget)}.csv",
                                 rep.chosen, videos))
    for prov, rs, _, _ in extra_rows:
        cum += _cumulative_rows(prov, "", rs, videos)
        outputs.append(write_set(out / "sets" / f"{prov}.csv", rs, videos))
    outputs.append(write_csv(out / "per_video.csv",
                             ("method", "budget_kbps", "video", "satisfaction"), per_video))
    outputs.append(write_csv(out / "cumulative_rates.csv",
                             ("method", "budget_kbps", "video", "view_label", "cumulative_kbps"),
                             cum))
    outputs.append(_population_file(out, population))
    outputs.append(write_manifest(out, "optimize", cfg, outputs))
    return outputs


def _population_file(out: Path, population) -> Path:
    path = out / "population.json"
    path.write_text(json.dumps(population_manifest(population), indent=2) + "\n")
    return path


def resolve_set(source: str, cfg: RunConfig, videos, population) -> RepresentationSet:
    """``optimized``, a provider name, ``pa-<spacing>`` or a set CSV path."""
    budget = kbps(cfg.simulation.budget_mbps) if cfg.simulation.budget_mbps else max(cfg.budgets())
    if source == "optimized":
        rep = optimize_sweep(cfg.ladder(), population, [budget], videos, cfg.solver.node_limit,
                             workers=cfg.solver.workers)[0]
        if not rep.optimal:
            log.warning("optimized set hit the node limit (gap %.3g)", rep.gap)
        return rep.chosen
    if source in PROVIDER_LADDERS:
        return recommended_set(source, videos, population, resolution=cfg.population.resolution)
    if source.startswith("pa-"):
        try:
            spacing = float(source[3:])
        except ValueError:
            raise ConfigInvalid(f"bad PA source {source!r}") from None
        return pa_sweep(cfg.ladder(), population, [budget], videos, spacing,
                        cfg.solver.node_limit, cfg.solver.workers)[0].chosen
    return read_set(source, videos)


def _simulate_sets(cfg: RunConfig, sources: Sequence[str], out: Path):
    videos, population = _setup(cfg)
    sim = cfg.simulation
    sets = {}
    for src in sources:
        name = Path(src).stem if src.endswith(".csv") else src
        sets[name] = resolve_set(src, cfg, videos, population)
    users = make_users(videos, sim.users, cfg.seed, cfg.population.video_probs,
                       cfg.population.resolution)
    focus = None
    if cfg.population.build().focus_var:
        focus = {vid: v / videos[vid].label_spacing ** 2
                 for vid, v in cfg.population.build().focus_var.items() if vid in videos}
    pop_cfg = cfg.population.build()
    regions = None
    if pop_cfg.fixed_window is not None:
        regions = {vid: NavigationWindow(*(v.tick_of_label(x) for x in pop_cfg.fixed_window))
                   for vid, v in videos.items()}
    channel = sim.channel.build()
    traces = {name: run_population(users, rs, videos, sim.horizon, sim.repetitions, cfg.seed,
                                   channel, pop_cfg.nav, sim.bias, focus, regions)
              for name, rs in sets.items()}
    slots = []
    for name, trs in traces.items():
        for t in trs:
            for r in t.records:
                slots.append((name, t.repetition, t.user.user_id, t.user.video, r.slot, r.u, r.lo,
                              r.hi, r.channel_kbps, r.budget, r.cost, f"{r.satisfaction:.12f}",
                              r.status))
    outputs = [write_csv(out / "slots.csv",
                         ("set", "repetition", "user_id", "video", "slot", "u", "lo", "hi",
                          "channel_kbps", "budget", "cost", "satisfaction", "status"), slots)]
    for name, rs in sets.items():
        outputs.append(write_set(out / "sets" / f"{name}.csv", rs, videos))
    return videos, population, sets, traces, outputs


def _summary_rows(traces):
    for name, trs in traces.items():
        agg = aggregate(trs)
        yield (name, "population", "", f"{agg.population:.12f}", f"{agg.population_ci:.12f}",
               f"{agg.stall_fraction:.6f}")
        for vid, m in agg.per_class.items():
            yield (name, "video", vid, f"{m:.12f}", "", "")
        for uid, m in agg.per_user.items():
            yield (name, "user", uid, f"{m:.12f}", "", "")


SUMMARY_COLUMNS = ("set", "level", "key", "mean_satisfaction", "ci95_half", "stall_fraction")


def cmd_simulate(cfg: RunConfig, out: Path, sources: Sequence[str] | None = None) -> list[Path]:
    sources = list(sources or cfg.simulation.sets[:1])
    _, population, sets, traces, outputs = _simulate_sets(cfg, sources, out)
    outputs.append(write_csv(out / "summary.csv", SUMMARY_COLUMNS, _summary_rows(traces)))
    outputs.append(_population_file(out, population))
    outputs.append(write_manifest(out, "simulate", cfg, outputs,
                                  {"storage_kbps": {n: s.storage_cost for n, s in sets.items()}}))
    return outputs


def cmd_compare(cfg: RunConfig, out: Path, sources: Sequence[str] | None = None) -> list[Path]:
    sources = list(sources or cfg.simulation.sets)
    if len(sources) < 2:
        raise ConfigInvalid("compare needs at least two set sources")
    _, population, sets, traces, outputs = _simulate_sets(cfg, sources, out)
    names = list(traces)
    aggs = {n: aggregate(t) for n, t in traces.items()}
    users = sorted(aggs[names[0]].per_user)
    video_of = {t.user.user_id: t.user.video for t in traces[names[0]]}
    rows = [(u, video_of[u], *(f"{aggs[n].per_user[u]:.12f}" for n in names)) for u in users]
    rows.append(("mean", "", *(f"{aggs[n].population:.12f}" for n in names)))
    outputs.append(write_csv(out / "comparison.csv", ("user_id", "video", *names), rows))
    diffs = []
    for n in names[1:]:
        d, half = paired_difference(traces[names[0]], traces[n])
        diffs.append((names[0], n, f"{d:.12f}", f"{half:.12f}", int(d - half > 0)))
    outputs.append(write_csv(out / "differences.csv",
                             ("set_a", "set_b", "mean_difference", "ci95_half", "a_better"),
                             diffs))
    outputs.append(write_csv(out / "summary.csv", SUMMARY_COLUMNS, _summary_rows(traces)))
    outputs.append(_population_file(out, population))
    outputs.append(write_manifest(out, "compare", cfg, outputs,
                                  {"storage_kbps": {n: s.storage_cost for n, s in sets.items()}}))
    return outputs


def cmd_export_ilp(cfg: RunConfig, out: Path, path: Path | None = None) -> list[Path]:
    videos, population = _setup(cfg)
    budget = cfg.budgets()[0]
    path = path or out / f"model_{_label(budget)}.lp"
    path.parent.mkdir(parents=True, exist_ok=True)
    model = export_ilp(cfg.ladder(), population, budget, videos, path)
    outputs = [path, _population_file(out, population)]
    outputs.append(write_manifest(out, "export-ilp", cfg, [p for p in outputs if out in p.parents],
                                  {"counts": model.counts(), "lp_file": str(path)}))
    return outputs


def cmd_gap_study(cfg: RunConfig, out: Path) -> list[Path]:
    g = cfg.gap_study
    results = gap_study(g.instances, cfg.seed, max_cameras=g.max_cameras,
                        max_rates=g.max_rates, max_q=g.max_q)
    rows = [(r.index, f"{r.free_value:.12f}", f"{r.chain_value:.12f}", f"{r.gap:.12f}",
             int(r.zero), r.skipped) for r in results]
    outputs = [write_csv(out / "gap.csv",
                         ("instance", "free_optimum", "chain_optimum", "gap", "zero_gap",
                          "skipped"), rows)]
    frac = zero_gap_fraction(results)
    done = [r for r in results if not r.skipped]
    summary = {"instances": len(results), "solved": len(done), "zero_gap_fraction": frac,
               "min_gap": min((r.gap for r in done), default=None),
               "max_gap": max((r.gap for r in done), default=None)}
    outputs.append(write_manifest(out, "gap-study", cfg, outputs, {"gap_summary": summary}))
    print(f"zero-gap fraction {frac:.4f} over {len(done)} instances")
    return outputs


# -- Entry point ---------------------------------------------------------------

def _budgets(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad budget list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--budget-sweep", type=_budgets, metavar="MBPS,...",
                        help="storage budgets in Mbps (overrides config)")
    common.add_argument("--scenario", choices=("nw-homogeneous", "bw-homogeneous", "none"),
                        help="population scenario preset (overrides config)")
    common.add_argument("--node-limit", type=int, help="branch-and-bound node limit")
    common.add_argument("--workers", type=int, help="processes for the per-video searches")
    p = argparse.ArgumentParser(prog="mvstream", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    opt = sub.add_parser("optimize", parents=[common], help="optimal sets over a budget sweep")
    opt.add_argument("--baselines", action="store_true", help="add PA and provider sets")
    for name, text in (("simulate", "simulate users against a stored set"),
                       ("compare", "simulate several sets with common seeds")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--set", dest="sets", action="append", metavar="SOURCE",
                       help="optimized | apple | netflix | youtube | pa-<spacing> | path.csv")
    e = sub.add_parser("export-ilp", parents=[common], help="write the ILP in CPLEX LP format")
    e.add_argument("--lp", type=Path, help="LP file path (default: <out>/model_<budget>.lp)")
    sub.add_parser("gap-study", parents=[common], help="free pairing vs segment chains")
    return p


def _config(args) -> RunConfig:
    over = {"seed": args.seed, "out": str(args.out) if args.out else None,
            "budgets_mbps": args.budget_sweep}
    cfg = load_config(args.config, **over)
    changes = {}
    if args.scenario:
        changes["population"] = cfg.population.model_copy(
            update={"scenario": None if args.scenario == "none" else args.scenario})
    if args.node_limit or args.workers:
        changes["solver"] = cfg.solver.model_copy(update={
            k: v for k, v in (("node_limit", args.node_limit), ("workers", args.workers)) if v})
    return RunConfig.model_validate({**cfg.model_dump(), **{k: v.model_dump() for k, v in changes.items()}})


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("MVSTREAM_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "optimize":
            outputs = cmd_optimize(cfg, out, args.baselines)
        elif args.command == "simulate":
            outputs = cmd_simulate(cfg, out, args.sets)
        elif args.command == "compare":
            outputs = cmd_compare(cfg, out, args.sets)
        elif args.command == "export-ilp":
            outputs = cmd_export_ilp(cfg, out, args.lp)
        else:
            outputs = cmd_gap_study(cfg, out)
    except (ConfigInvalid, ModelError, MissingSetFile) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for p in outputs:
        log.info("wrote %s", p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
