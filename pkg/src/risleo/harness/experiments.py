"""Experiment presets: sweeps over modes, RIS size, group size, speed and constellation.

Each preset expands to a list of points. A point is one config plus a
runner; its rows carry ``(scenario_id, slot, key, metric, value, seed)`` so
every number can be traced to a scenario, a slot and a seed.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..ao import MODES, FrameResult, optimize_slot
from .config import ScenarioConfig
from .scenario import build_scenario

EXPERIMENTS = (
    "convergence",
    "schemes_vs_time",
    "trajectory_plot",
    "speed_altitude_sweep",
    "ris_elements_sweep",
    "connection_strategies",
    "constellation_density",
)

# sweep grids at desk scale
GROUP_SIZES = (2, 3, 4)
RIS_SIZES = (4, 8, 16, 32)
SPEEDS = (0.0, 5.0, 10.0)
ALTITUDES = (50.0, 100.0)
SATS_PER_PLANE = (16, 22, 28)
TRAJECTORY_SPEEDS = (5.0, 10.0)
STRATEGY_ARMS = (
    ("group_S2", {"group.strategy": "scenario_group", "group.size": 2}),
    ("group_S3", {"group.strategy": "scenario_group", "group.size": 3}),
    ("max_elevation", {"group.strategy": "max_elevation"}),
    ("max_access_time", {"group.strategy": "max_access_time"}),
)


@dataclass(frozen=True)
class Row:
    scenario_id: str
    slot: int | str
    key: int | str
    metric: str
    value: float
    seed: int


@dataclass(frozen=True)
class Point:
    figure: str
    scenario_id: str
    config: ScenarioConfig
    runner: str  # "slot" or "frame"
    mode: str = "full_ao"


@dataclass
class PointResult:
    figure: str
    scenario_id: str
    config_hash: str
    status: str
    rows: list[Row]
    seconds: float


@dataclass
class ExperimentReport:
    preset: str
    seed: int
    config: ScenarioConfig
    points: list[PointResult] = field(default_factory=list)

    def rows(self, figure: str) -> list[Row]:
        return [r for p in self.points if p.figure == figure for r in p.rows]

    @property
    def figures(self) -> list[str]:
        out: list[str] = []
        for p in self.points:
            if p.figure not in out:
                out.append(p.figure)
        return out

    @property
    def ok(self) -> bool:
        return all(p.status == "ok" for p in self.points)


def _frame_rows(scenario_id: str, frame: FrameResult, seed: int) -> list[Row]:
    rows = []
    for rec in frame.slots:
        if rec.report is None:
            continue
        rows.append(Row(scenario_id, rec.slot, "min", "min_rate", rec.report.min_rate, seed))
        for k, r in enumerate(rec.report.approx_rates):
            rows.append(Row(scenario_id, rec.slot, k, "rate", float(r), seed))
        rows.append(Row(scenario_id, rec.slot, "x", "uav_position", float(rec.q[0]), seed))
        rows.append(Row(scenario_id, rec.slot, "y", "uav_position", float(rec.q[1]), seed))
        rows.append(Row(scenario_id, rec.slot, "energy", "energy_used", float(rec.e_cons), seed))
        if rec.solution is not None:
            rows.append(Row(scenario_id, rec.slot, "iterations", "outer_iterations", rec.solution.iterations, seed))
    rates = frame.min_rates
    if np.any(np.isfinite(rates)):
        rows.append(Row(scenario_id, "mean", "min", "mean_min_rate", float(np.nanmean(rates)), seed))
    return rows


def run_point(point: Point) -> PointResult:
    start = time.perf_counter()
    cfg = point.config
    try:
        built = build_scenario(cfg)
        if point.runner == "slot":
            sol = optimize_slot(built.slot_scene(0), cfg.p_max, cfg.uav, settings=cfg.ao_settings)
            rows = [Row(point.scenario_id, 0, i, "t", float(t), cfg.seed) for i, t in enumerate(sol.t_trace)]
        else:
            frame = built.run(point.mode)
            rows = _frame_rows(point.scenario_id, frame, cfg.seed)
            failed = [r.slot for r in frame.slots if r.status != "ok"]
            if failed:
                status = f"slot failures: {failed}"
                return PointResult(point.figure, point.scenario_id, cfg.config_hash(), status, rows, time.perf_counter() - start)
        status = "ok"
    except Exception as exc:  # one bad point must not abort the sweep
        rows, status = [], f"failed: {type(exc).__name__}: {exc}"
    return PointResult(point.figure, point.scenario_id, cfg.config_hash(), status, rows, time.perf_counter() - start)


def expand(preset: str, base: ScenarioConfig, mode: str | None = None) -> list[Point]:
    """Points of an experiment preset over the base config."""
    if preset not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {preset!r}; choose from {list(EXPERIMENTS)}")
    pts: list[Point] = []
    if preset == "convergence":
        for S in GROUP_SIZES:
            cfg = base.with_overrides({"group.strategy": "scenario_group", "group.size": S})
            pts.append(Point("convergence", f"S={S}", cfg, "slot"))
    elif preset == "schemes_vs_time":
        for m in MODES if mode is None else (mode,):
            pts.append(Point("schemes_vs_time", m, base, "frame", m))
    elif preset == "trajectory_plot":
        moving = {
            "ue.count": 2,
            "ue.positions": [[0.0, 300.0], [0.0, 280.0]],
            "ue.velocity": [5.0, 0.0],
        }
        for v in TRAJECTORY_SPEEDS:
            for m in ("full_ao", "random_ris") if mode is None else (mode,):
                cfg = base.with_overrides({**moving, "uav.v_max": v})
                pts.append(Point("trajectory", f"{m}/v_max={v:g}", cfg, "frame", m))
    elif preset == "speed_altitude_sweep":
        for h in ALTITUDES:
            for v in SPEEDS:
                cfg = base.with_overrides({"uav.v_max": v, "uav.altitude": h})
                pts.append(Point("speed_altitude", f"v_max={v:g}/h0={h:g}", cfg, "frame", mode or "full_ao"))
    elif preset == "ris_elements_sweep":
        for M in RIS_SIZES:
            cfg = base.with_overrides({"arrays.ris_elements": M})
            pts.append(Point("ris_elements", f"M_r={M}", cfg, "frame", mode or "full_ao"))
    elif preset == "connection_strategies":
        for name, over in STRATEGY_ARMS:
            # single-satellite arms can serve at most one array's worth of UEs
            antennas = base["arrays.sat_nx"] * base["arrays.sat_ny"] * over.get("group.size", 1)
            over = {**over, "ue.count": min(base.K, antennas)}
            if base["ue.positions"]:
                over["ue.positions"] = base["ue.positions"][: over["ue.count"]]
            cfg = base.with_overrides(over)
            pts.append(Point("connection_strategies", name, cfg, "frame", mode or "full_ao"))
    elif preset == "constellation_density":
        for P in SATS_PER_PLANE:
            cfg = base.with_overrides({"constellation.sats_per_plane": P})
            pts.append(Point("constellation_density", f"sats_per_plane={P}", cfg, "frame", mode or "full_ao"))
    return pts


def run_experiment(
    preset: str,
    overrides: dict[str, Any] | None = None,
    seed: int | None = None,
    paper_scale: bool = False,
    mode: str | None = None,
    jobs: int = 1,
    base: ScenarioConfig | None = None,
    on_point: Callable[[ExperimentReport], None] | None = None,
) -> ExperimentReport:
    """Run every point of a preset; desk scale unless ``paper_scale``.

    Points are independent. ``on_point`` receives the partial report (in
    point order, not completion order) each time a point finishes, which lets
    callers persist progress.
    """
    if base is None:
        base = ScenarioConfig.from_values(None, "table2" if paper_scale else "desk")
    extra = dict(overrides or {})
    if seed is not None:
        extra["run.seed"] = seed
    if extra:
        base = base.with_overrides(extra)
    points = expand(preset, base, mode)
    results: list[PointResult | None] = [None] * len(points)

    def done(i: int, res: PointResult) -> None:
        results[i] = res
        if on_point is not None:
            on_point(ExperimentReport(preset, base.seed, base, [r for r in results if r is not None]))

    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(run_point, p): i for i, p in enumerate(points)}
            for fut in as_completed(futures):
                done(futures[fut], fut.result())
    else:
        for i, p in enumerate(points):
            done(i, run_point(p))
    return ExperimentReport(preset, base.seed, base, [r for r in results if r is not None])
