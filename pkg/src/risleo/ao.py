"""Alternating optimisation of beamforming, RIS phases and UAV position.

Each slot cycles through the three block designs, every one warm-started at
the current objective so the minimum approximated rate never drops. The
frame loop moves satellites and UEs, rebuilds the statistics and carries the
previous slot's solution forward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .beamforming import design_beamforming
from .bisection import SolverSettings
from .channel import StatisticalCsi
from .phase import design_phase
from .rate import RateReport, approx_min_rate, mrt_beamformer, per_satellite_power, rate_report
from .trajectory import (
    UavModel,
    design_trajectory_step,
    energy_guard,
    slot_energy,
    uav_position,
)

MODES = ("full_ao", "delayed_update", "fixed_uav", "random_ris", "no_ris", "two_stage_stub")


@dataclass(frozen=True)
class SlotScene:
    """What the optimiser needs about one slot: UE positions and a CSI builder."""

    ue_positions: np.ndarray  # (K, 3) local metres
    build: Callable[[np.ndarray], StatisticalCsi]  # horizontal UAV position -> statistics


def frozen_angle_scene(csi: StatisticalCsi, ue_positions: np.ndarray, model: UavModel) -> SlotScene:
    """Scene whose only position dependence is the RIS-to-UE distance (angles fixed)."""
    ue_positions = np.asarray(ue_positions, dtype=float)

    def build(q):
        d = np.linalg.norm(uav_position(q, model)[None, :] - ue_positions, axis=1)
        return csi.at_ris_distance(d)

    return SlotScene(ue_positions, build)


@dataclass(frozen=True)
class AoSettings:
    convergence_threshold: float = 1e-3
    max_outer: int = 10
    solver: SolverSettings = SolverSettings()


@dataclass
class BlockRecord:
    iteration: int
    block: str
    before: float
    after: float
    accepted: bool
    found: bool
    t_certified: float
    t_max: float
    bisection_steps: int
    iteration_bound: int
    trace: object = None  # the block's BisectionTrace


@dataclass
class SlotSolution:
    V: np.ndarray
    theta: np.ndarray
    q: np.ndarray
    t_trace: list[float]
    iterations: int
    converged: bool
    blocks: list[BlockRecord] = field(default_factory=list)
    csi: StatisticalCsi | None = None

    @property
    def min_rate(self) -> float:
        return self.t_trace[-1]


def objective(csi: StatisticalCsi, V: np.ndarray, theta: np.ndarray) -> float:
    return approx_min_rate(csi, V, theta)[0]


def optimize_slot(
    scene: SlotScene,
    p_max: np.ndarray,
    model: UavModel,
    V0: np.ndarray | None = None,
    theta0: np.ndarray | None = None,
    q0: np.ndarray | None = None,
    e_cons: float = 0.0,
    settings: AoSettings = AoSettings(),
    optimize_phase: bool = True,
    optimize_trajectory: bool = True,
) -> SlotSolution:
    """Beamforming, then phases, then position, until the gain drops below the threshold.

    ``q0`` is both the starting iterate and the slot's anchor for the speed
    limit. A block result that lowers the objective is discarded.
    """
    p_max = np.asarray(p_max, dtype=float)
    anchor = np.zeros(2) if q0 is None else np.asarray(q0, dtype=float)
    q = anchor.copy()
    csi = scene.build(q)
    theta = np.zeros(csi.M) if theta0 is None else np.asarray(theta0, dtype=float)
    V = mrt_beamformer(csi, theta, p_max) if V0 is None else np.asarray(V0, dtype=complex)
    f = objective(csi, V, theta)
    sol = SlotSolution(V, theta, q, [f], 0, False, csi=csi)
    s = settings.solver

    def record(l, name, before, after, accepted, res, t_max):
        sol.blocks.append(
            BlockRecord(
                l, name, before, after, accepted, res.found, res.t, t_max,
                res.trace.iterations, res.trace.iteration_bound, res.trace,
            )
        )

    for l in range(1, settings.max_outer + 1):
        start = f
        res = design_beamforming(csi, theta, p_max, t_min=f, V_init=V, settings=s)
        after = objective(csi, res.V, theta)
        ok = res.found and after >= f
        if ok:
            V, f = res.V, after
        record(l, "beamforming", start, after, ok, res, res.t_max)

        if optimize_phase:
            before = f
            res = design_phase(csi, V, t_min=f, theta_init=theta, settings=s)
            after = objective(csi, V, res.theta)
            ok = res.found and after >= f
            if ok:
                theta, f = res.theta, after
            record(l, "phase", before, after, ok, res, res.t_max)

        if optimize_trajectory and model.v_max > 0:
            before = f
            res = design_trajectory_step(
                csi, V, theta, q, scene.ue_positions, model, t_min=f, e_cons=e_cons, settings=s, anchor=anchor
            )
            after = f
            ok = False
            if res.found:
                new_csi = scene.build(res.q)
                after = objective(new_csi, V, theta)
                ok = after >= f
                if ok:
                    q, csi, f = res.q, new_csi, after
            record(l, "trajectory", before, after, ok, res, res.t_max)

        sol.t_trace.append(f)
        sol.iterations = l
        if f - start <= settings.convergence_threshold:
            sol.converged = True
            break
    sol.V, sol.theta, sol.q, sol.csi = V, theta, q, csi
    return sol


def two_stage_design(
    csi: StatisticalCsi, p_max: np.ndarray, rng: np.random.Generator, candidates: int = 64
) -> tuple[np.ndarray, np.ndarray]:
    """Experimental two-stage baseline: decorrelating phases, then regularised zero forcing.

    Stage one keeps the random phase draw with the lowest mean pairwise
    correlation of the effective mean channels; stage two applies RZF on those
    channels and scales each satellite block into its power budget.
    """
    p_max = np.asarray(p_max, dtype=float)
    best, best_corr = np.zeros(csi.M), math.inf
    for i in range(candidates):
        theta = np.zeros(csi.M) if i == 0 else rng.uniform(0, 2 * np.pi, csi.M)
        E = csi.effective_mean(theta)
        U = E / np.maximum(np.linalg.norm(E, axis=1, keepdims=True), 1e-300)
        C = np.abs(U @ U.conj().T)
        corr = (C.sum() - np.trace(C)) / max(csi.K * (csi.K - 1), 1)
        if corr < best_corr - 1e-15:
            best, best_corr = theta, corr
    E = csi.effective_mean(best)  # rows are h^H
    H = E.conj().T  # (N, K)
    reg = csi.K * float(np.mean(csi.noise)) / float(np.sum(p_max))
    V = H @ np.linalg.solve(H.conj().T @ H + reg * np.eye(csi.K), np.eye(csi.K))
    V = V / np.maximum(np.linalg.norm(V, axis=0, keepdims=True), 1e-300)
    V = V * math.sqrt(float(np.sum(p_max)) / csi.K)
    power = per_satellite_power(V, csi.n_t)
    for s in range(csi.S):
        if power[s] > p_max[s]:
            V[s * csi.n_t : (s + 1) * csi.n_t] *= math.sqrt(p_max[s] / power[s])
    return V, best


@dataclass
class SlotRecord:
    slot: int
    status: str
    solution: SlotSolution | None
    report: RateReport | None
    q: np.ndarray
    e_cons: float


@dataclass
class FrameResult:
    mode: str
    slots: list[SlotRecord]
    trajectory: np.ndarray  # (n_slots + 1, 2) including the start point
    energy: np.ndarray  # cumulative consumption after each slot

    @property
    def min_rates(self) -> np.ndarray:
        return np.array([r.report.min_rate if r.report is not None else math.nan for r in self.slots])


def run_frame(
    scene_at: Callable[[int], SlotScene],
    n_slots: int,
    p_max: np.ndarray,
    model: UavModel,
    mode: str = "full_ao",
    settings: AoSettings = AoSettings(),
    rng: np.random.Generator | None = None,
    q_start: np.ndarray | None = None,
) -> FrameResult:
    """Slot-by-slot optimisation with warm starts and the energy ledger.

    ``rng`` drives the random-phase and two-stage baselines only.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(0) if rng is None else rng
    p_max = np.asarray(p_max, dtype=float)
    q = np.zeros(2) if q_start is None else np.asarray(q_start, dtype=float)
    positions = [q.copy()]
    energy = []
    e_cons = 0.0
    V = theta = None
    slots: list[SlotRecord] = []
    for n in range(n_slots):
        try:
            scene = scene_at(n)
            if mode == "no_ris":
                base = scene
                scene = SlotScene(base.ue_positions, lambda qq, b=base: b.build(qq).without_ris())
            if mode == "delayed_update" and n > 0:
                # decided on the previous slot's statistics, applied now
                stale = scene_at(n - 1)
                sol = optimize_slot(stale, p_max, model, V, theta, q, e_cons, settings)
                sol.csi = scene.build(sol.q)
            elif mode == "two_stage_stub":
                csi = scene.build(q)
                V_ts, th_ts = two_stage_design(csi, p_max, rng)
                sol = SlotSolution(V_ts, th_ts, q.copy(), [objective(csi, V_ts, th_ts)], 0, True, csi=csi)
            else:
                theta_in = theta
                if mode == "random_ris":
                    M = scene.build(q).M
                    theta_in = rng.uniform(0, 2 * np.pi, M)
                sol = optimize_slot(
                    scene,
                    p_max,
                    model,
                    V,
                    theta_in,
                    q,
                    e_cons,
                    settings,
                    optimize_phase=mode in ("full_ao", "fixed_uav", "delayed_update"),
                    optimize_trajectory=mode in ("full_ao", "random_ris", "delayed_update"),
                )
        except (ValueError, np.linalg.LinAlgError) as exc:
            slots.append(SlotRecord(n, f"failed: {exc}", None, None, q.copy(), e_cons))
            positions.append(q.copy())
            e_cons += slot_energy(q, q, model)
            energy.append(e_cons)
            continue
        e_cons += slot_energy(q, sol.q, model)
        q = sol.q.copy()
        if not energy_guard(uav_position(q, model), e_cons, model):
            status = "energy guard violated"
        else:
            status = "ok"
        V, theta = sol.V, sol.theta
        slots.append(SlotRecord(n, status, sol, rate_report(sol.csi, sol.V, sol.theta), q.copy(), e_cons))
        positions.append(q.copy())
        energy.append(e_cons)
    return FrameResult(mode, slots, np.array(positions), np.array(energy))
