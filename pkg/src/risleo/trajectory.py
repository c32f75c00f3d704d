"""Per-slot RIS-UAV placement and the rotary-wing energy model.

All position dependence of the approximated SINR enters through the inverse
RIS-to-UE distance ``c_k = 1 / ||q - q_k||``: each received-power term is
``Upsilon + chi * c + psi * c**2`` with the angles frozen at the previous
position. The step keeps an upper and a lower bracket on ``c_k``, so every
surrogate below is an inner approximation of the exact constraint:

* interference uses the upper bracket for positive coefficients and the lower
  one for negative ones,
* the signal uses the opposite choice, with ``c**2`` replaced by its tangent,
* ``c_lo <= 1/d`` is enforced through the tangent of ``1/c**2`` and
  ``c_hi >= 1/d`` through the tangent of the distance itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beamforming import TRIVIAL_TARGET
from .bisection import BisectionTrace, SolverSettings, bisect
from .channel import StatisticalCsi
from .conic import SdpProblem
from .rate import approx_sinrs

LENGTH_UNIT = 100.0  # metres per solver length unit


@dataclass(frozen=True)
class UavModel:
    altitude: float = 100.0
    v_max: float = 5.0
    l_max: float = 200.0
    slot_duration: float = 1.0
    blade_power: float = 79.86  # P_0, W
    induced_power: float = 88.63  # hover induced power, W
    induced_velocity: float = 4.03  # m/s
    blade_angular_velocity: float = 300.0  # rad/s
    blade_radius: float = 0.4  # m
    fuselage_drag: float = 0.6
    rotor_solidity: float = 0.05
    disc_area: float = 0.503  # m^2
    air_density: float = 1.225  # kg/m^3
    e_max: float = 100e3  # J

    def __post_init__(self):
        positive = (
            self.altitude,
            self.l_max,
            self.slot_duration,
            self.blade_power,
            self.induced_power,
            self.induced_velocity,
            self.blade_angular_velocity,
            self.blade_radius,
            self.fuselage_drag,
            self.rotor_solidity,
            self.disc_area,
            self.air_density,
            self.e_max,
        )
        if min(positive) <= 0:
            raise ValueError("UAV physical constants must be positive")
        if self.v_max < 0:
            raise ValueError("v_max must be non-negative")
        if self.altitude > self.l_max:
            raise ValueError("altitude exceeds the flight radius")

    @property
    def step_length(self) -> float:
        return self.slot_duration * self.v_max


def power_components(speed: float, model: UavModel) -> tuple[float, float, float]:
    """Blade-profile, induced and parasitic power at forward speed ``speed``."""
    if speed < 0:
        raise ValueError("speed must be non-negative")
    v2 = speed * speed
    v0 = model.induced_velocity
    blade = model.blade_power * (1.0 + 3.0 * v2 / (model.blade_angular_velocity * model.blade_radius) ** 2)
    induced = model.induced_power * math.sqrt(math.sqrt(1.0 + v2 * v2 / (4.0 * v0**4)) - v2 / (2.0 * v0**2))
    parasitic = 0.5 * model.fuselage_drag * model.air_density * model.rotor_solidity * model.disc_area * speed**3
    return blade, induced, parasitic


def propulsion_power(speed: float, model: UavModel) -> float:
    blade, induced, parasitic = power_components(speed, model)
    return blade + induced + parasitic


def max_slot_power(model: UavModel) -> float:
    """Upper bound on the propulsion power over speeds in [0, v_max].

    Blade and parasitic terms increase with speed and the induced term peaks
    at hover, so their separate maxima bound the sum.
    """
    blade, _, parasitic = power_components(model.v_max, model)
    return blade + model.induced_power + parasitic


def return_energy(position: np.ndarray, model: UavModel) -> float:
    """Energy to fly straight back to the charging station at full speed."""
    if model.v_max == 0:
        return 0.0 if np.linalg.norm(position) == 0 else math.inf
    return float(np.linalg.norm(position)) / model.v_max * propulsion_power(model.v_max, model)


def energy_guard(position: np.ndarray, e_cons: float, model: UavModel) -> bool:
    return return_energy(position, model) + e_cons <= model.e_max


def slot_energy(q_prev: np.ndarray, q_new: np.ndarray, model: UavModel) -> float:
    """Propulsion energy of one slot flown at constant speed."""
    speed = float(np.linalg.norm(np.asarray(q_new) - np.asarray(q_prev))) / model.slot_duration
    return model.slot_duration * propulsion_power(speed, model)


def uav_position(q: np.ndarray, model: UavModel) -> np.ndarray:
    """Horizontal position to the 3-D local position at the flight altitude."""
    return np.array([q[0], q[1], model.altitude], dtype=float)


@dataclass(frozen=True)
class RecastCoefficients:
    upsilon: np.ndarray  # (K, K) distance-free power
    chi: np.ndarray  # (K, K) coefficient of 1/d
    psi: np.ndarray  # (K, K) coefficient of 1/d**2
    u: np.ndarray  # (K, N) RIS cascade row per UE at unit distance
    r: np.ndarray  # (K, N) direct NLoS scale
    w: np.ndarray  # (K, N) cascade NLoS scale at unit distance
    g_prime: np.ndarray  # (K,)
    noise: np.ndarray  # (K,)

    @property
    def K(self) -> int:
        return self.upsilon.shape[0]

    def terms(self, distances: np.ndarray) -> np.ndarray:
        c = 1.0 / np.asarray(distances, dtype=float)
        return self.upsilon + self.chi * c[:, None] + self.psi * (c**2)[:, None]

    def sinrs(self, distances: np.ndarray) -> np.ndarray:
        T = self.terms(distances)
        signal = np.diag(T).copy()
        return signal / (T.sum(axis=1) - signal + self.noise)


def recast_coefficients(csi: StatisticalCsi, V: np.ndarray, theta: np.ndarray) -> RecastCoefficients:
    V = np.asarray(V, dtype=complex)
    c0 = csi.fading_coeff
    phases = np.exp(1j * np.asarray(theta, dtype=float))
    u = (c0 * np.sqrt(csi.nu / (csi.nu + 1)))[:, None] * ((csi.g_los.conj() * phases) @ csi.G_bar)
    g_prime = c0**2 / (csi.nu + 1)
    w = (c0 * np.sqrt(csi.cascade_factor))[:, None] * csi.G_scale[None, :]
    r = csi.b
    direct = csi.h_bar.conj() @ V  # (K, K)
    cascade = u @ V
    power = np.abs(V) ** 2
    upsilon = (r**2) @ power + np.abs(direct) ** 2
    chi = 2.0 * np.real(cascade * direct.conj())
    psi = np.abs(cascade) ** 2 + g_prime[:, None] * (np.linalg.norm(csi.G_bar @ V, axis=0) ** 2)[None, :] + (w**2) @ power
    return RecastCoefficients(upsilon, chi, psi, u, r, w, g_prime, csi.noise.copy())


@dataclass
class TrajectoryStep:
    feasible: bool
    q_prev: np.ndarray
    q_new: np.ndarray | None = None
    beta: np.ndarray | None = None
    c_upper: np.ndarray | None = None
    c_lower: np.ndarray | None = None
    c_pre: np.ndarray | None = None
    exact_margin: float = math.nan  # min over UEs of the exact constraint slack, relative
    reason: str = ""


@dataclass
class TrajectoryResult:
    q: np.ndarray
    t: float
    found: bool
    t_max: float
    t_max_literal: float
    trace: BisectionTrace
    steps: list[TrajectoryStep] = field(default_factory=list)


def _distances(q: np.ndarray, ue_positions: np.ndarray, model: UavModel) -> np.ndarray:
    return np.linalg.norm(uav_position(q, model)[None, :] - ue_positions, axis=1)


def exact_margins(
    coeffs: RecastCoefficients, q: np.ndarray, ue_positions: np.ndarray, t: float, model: UavModel
) -> np.ndarray:
    """Relative slack of ``signal - gamma * (interference + noise) >= 0`` at ``q``."""
    gamma = 2.0**t - 1.0
    T = coeffs.terms(_distances(q, ue_positions, model))
    signal = np.diag(T).copy()
    interference = T.sum(axis=1) - signal + coeffs.noise
    return (signal - gamma * interference) / (signal + gamma * interference)


def motion_radius_limit(model: UavModel, e_cons: float) -> float:
    """Largest 3-D distance from the station that keeps the energy guard after one more slot."""
    if model.v_max == 0:
        return math.inf
    budget = model.e_max - e_cons - model.slot_duration * max_slot_power(model)
    return budget * model.v_max / propulsion_power(model.v_max, model)


def solve_p41(
    coeffs: RecastCoefficients,
    q_prev: np.ndarray,
    ue_positions: np.ndarray,
    t: float,
    model: UavModel,
    e_cons: float = 0.0,
    settings: SolverSettings = SolverSettings(),
    anchor: np.ndarray | None = None,
) -> TrajectoryStep:
    """Convex inner approximation of the position problem at fixed target ``t``.

    ``q_prev`` is the expansion point; ``anchor`` (default ``q_prev``) is the
    position at the start of the slot that the speed limit is measured from.
    """
    q_prev = np.asarray(q_prev, dtype=float)
    anchor = q_prev if anchor is None else np.asarray(anchor, dtype=float)
    step = TrajectoryStep(False, q_prev)
    if t <= TRIVIAL_TARGET:
        step.feasible, step.q_new, step.reason = True, q_prev.copy(), "trivial target"
        return step
    gamma = 2.0**t - 1.0
    K = coeffs.K
    unit = LENGTH_UNIT
    ue = np.asarray(ue_positions, dtype=float) / unit
    q0 = q_prev / unit
    h = model.altitude / unit
    d_prev = np.linalg.norm(np.append(q0, h)[None, :] - ue, axis=1)
    c_pre = 1.0 / d_prev
    # powers relative to each UE's noise, inverse distances in solver units
    s = 1.0 / coeffs.noise
    ups = coeffs.upsilon * s[:, None]
    chi = coeffs.chi * s[:, None] / unit
    psi = coeffs.psi * s[:, None] / unit**2

    n = 2 + 3 * K
    iq, ib, ihi, ilo = 0, 2, 2 + K, 2 + 2 * K

    def vec(pairs):
        v = np.zeros(n)
        for i, coef in pairs:
            v[i] += coef
        return v

    prob = SdpProblem()
    x = prob.add_scalars(n)

    for k in range(K):
        others = [l for l in range(K) if l != k]
        ups_i = ups[k, others].sum()
        chi_i = chi[k, others].sum()
        psi_i = psi[k, others].sum()
        # beta_k >= ups_i + chi_i * c + psi_i * c^2 + 1, rotated cone on psi_i * c_hi^2
        lin = vec([(ib + k, 1.0), (ihi + k, -max(chi_i, 0.0)), (ilo + k, max(-chi_i, 0.0))])
        rest = -(ups_i + 1.0)
        root = math.sqrt(max(psi_i, 0.0))
        prob.add_soc(
            ({x: lin}, rest + 1.0),
            [({x: vec([(ihi + k, 2.0 * root)])}, 0.0), ({x: lin}, rest - 1.0)],
        )
        # gamma * beta_k <= signal lower bound
        ckk, pkk = chi[k, k], psi[k, k]
        sig = vec([(ilo + k, max(ckk, 0.0) + 2.0 * pkk * c_pre[k]), (ihi + k, -max(-ckk, 0.0)), (ib + k, -gamma)])
        prob.add_linear({x: sig}, ">=", -(ups[k, k] - pkk * c_pre[k] ** 2))
        # ||q - q_k||^2 <= 3 / c_pre^2 - 2 c_lo / c_pre^3
        bound = vec([(ilo + k, -2.0 / c_pre[k] ** 3)])
        bconst = 3.0 / c_pre[k] ** 2
        prob.add_soc(
            ({x: bound}, bconst + 1.0),
            [
                ({x: vec([(iq, 2.0)])}, -2.0 * ue[k, 0]),
                ({x: vec([(iq + 1, 2.0)])}, -2.0 * ue[k, 1]),
                ({x: np.zeros(n)}, 2.0 * (h - ue[k, 2])),
                ({x: bound}, bconst - 1.0),
            ],
        )
        # c_hi * d_lin >= 1 with d_lin the tangent of the distance at q_prev
        direction = (np.append(q0, h) - ue[k]) / d_prev[k]
        d_lin = vec([(iq, direction[0]), (iq + 1, direction[1])])
        d_const = float(direction[2] * (h - ue[k, 2]) - direction[:2] @ ue[k, :2])
        c_hi = vec([(ihi + k, 1.0)])
        prob.add_soc(
            ({x: c_hi + d_lin}, d_const),
            [({x: np.zeros(n)}, 2.0), ({x: c_hi - d_lin}, -d_const)],
        )
        prob.add_linear({x: vec([(ilo + k, 1.0)])}, ">=", 0.0)

    # motion, flight radius and return-energy limits
    prob.add_soc(
        ({x: np.zeros(n)}, model.step_length / unit),
        [({x: vec([(iq, 1.0)])}, -anchor[0] / unit), ({x: vec([(iq + 1, 1.0)])}, -anchor[1] / unit)],
    )
    radius = min(model.l_max, motion_radius_limit(model, e_cons))
    if radius < model.altitude:
        step.reason = "energy budget exhausted"
        return step
    prob.add_soc(
        ({x: np.zeros(n)}, radius / unit),
        [({x: vec([(iq, 1.0)])}, 0.0), ({x: vec([(iq + 1, 1.0)])}, 0.0), ({x: np.zeros(n)}, h)],
    )
    prob.set_objective({x: np.zeros(n)})
    out = prob.solve(tol=settings.conic_tol, max_iter=settings.max_solver_iter)
    if not out.optimal:
        step.reason = out.status
        return step
    sol = out.values[x]
    step.q_new = sol[iq : iq + 2] * unit
    step.beta = sol[ib : ib + K] / s
    step.c_upper = sol[ihi : ihi + K] / unit
    step.c_lower = sol[ilo : ilo + K] / unit
    step.c_pre = c_pre / unit
    step.exact_margin = float(np.min(exact_margins(coeffs, step.q_new, ue_positions, t, model)))
    step.feasible = True
    step.reason = "optimal"
    return step


def _quadratic_range(a: float, b: float, c: float, lo: float, hi: float) -> tuple[float, float]:
    """Min and max of ``a + b x + c x^2`` (c >= 0) over [lo, hi]."""
    ends = [a + b * lo + c * lo**2, a + b * hi + c * hi**2]
    low = min(ends)
    if c > 0:
        vertex = -b / (2 * c)
        if lo < vertex < hi:
            low = min(low, a + b * vertex + c * vertex**2)
    return low, max(ends)


def trajectory_tmax(
    coeffs: RecastCoefficients, anchor: np.ndarray, ue_positions: np.ndarray, model: UavModel
) -> float:
    """Rate bound over every position reachable within one slot from ``anchor``."""
    out = math.inf
    reach = model.step_length
    for k in range(coeffs.K):
        offset = uav_position(anchor, model) - ue_positions[k]
        horizontal = float(np.linalg.norm(offset[:2]))
        d_min = math.hypot(max(horizontal - reach, 0.0), offset[2])
        d_max = math.hypot(horizontal + reach, offset[2])
        lo, hi = 1.0 / d_max, 1.0 / d_min
        others = [l for l in range(coeffs.K) if l != k]
        _, signal = _quadratic_range(coeffs.upsilon[k, k], coeffs.chi[k, k], coeffs.psi[k, k], lo, hi)
        interference, _ = _quadratic_range(
            coeffs.upsilon[k, others].sum(), coeffs.chi[k, others].sum(), coeffs.psi[k, others].sum(), lo, hi
        )
        out = min(out, math.log2(1.0 + max(signal, 0.0) / (max(interference, 0.0) + coeffs.noise[k])))
    return out


def literal_tmax(csi: StatisticalCsi, V: np.ndarray, theta: np.ndarray, model: UavModel) -> float:
    """Bound with the speed-scaled RIS amplitude, kept for reporting only."""
    V = np.asarray(V, dtype=complex)
    phases = np.exp(1j * np.asarray(theta, dtype=float))
    out = math.inf
    for k in range(csi.K):
        others = [l for l in range(csi.K) if l != k]
        v = V[:, k]
        ris = model.v_max / csi.ris_distance[k] * abs((csi.g_bar[k].conj() * phases) @ csi.G_bar @ v)
        nlos = lambda vec: (  # noqa: E731
            csi.F[k] ** 2 / (csi.nu[k] + 1) * np.linalg.norm(csi.G_bar @ vec) ** 2
            + np.sum((csi.a[k] * np.abs(vec)) ** 2)
            + np.sum((csi.b[k] * np.abs(vec)) ** 2)
        )
        Y = (abs(csi.h_bar[k].conj() @ v) + ris) ** 2 + nlos(v)
        J = sum(nlos(V[:, l]) for l in others)
        out = min(out, math.log2(1.0 + Y / (J + csi.noise[k])))
    return float(out)


def design_trajectory_step(
    csi: StatisticalCsi,
    V: np.ndarray,
    theta: np.ndarray,
    q_prev: np.ndarray,
    ue_positions: np.ndarray,
    model: UavModel,
    t_min: float = 0.0,
    e_cons: float = 0.0,
    settings: SolverSettings = SolverSettings(),
    anchor: np.ndarray | None = None,
) -> TrajectoryResult:
    """Bisection on the target rate with the position surrogate as oracle.

    ``csi`` must describe the RIS at ``q_prev``; ``ue_positions`` are local
    3-D coordinates in the same frame as ``q_prev``.
    """
    q_prev = np.asarray(q_prev, dtype=float)
    anchor = q_prev if anchor is None else np.asarray(anchor, dtype=float)
    ue_positions = np.asarray(ue_positions, dtype=float)
    coeffs = recast_coefficients(csi, V, theta)
    t_lit = literal_tmax(csi, V, theta, model)
    if model.v_max == 0:
        trace = BisectionTrace(t_min, t_min, settings.bisection_accuracy)
        return TrajectoryResult(q_prev.copy(), t_min, False, t_min, t_lit, trace)
    t_max = trajectory_tmax(coeffs, anchor, ue_positions, model)
    steps: list[TrajectoryStep] = []

    def probe(t):
        step = solve_p41(coeffs, q_prev, ue_positions, t, model, e_cons, settings, anchor)
        steps.append(step)
        info = {"reason": step.reason}
        if not step.feasible:
            return False, None, info
        info["exact_margin"] = step.exact_margin
        d = _distances(step.q_new, ue_positions, model)
        achieved = approx_sinrs(csi.at_ris_distance(d), V, theta)
        info["slack"] = float(t - np.min(np.log2(1.0 + achieved)))
        return True, step.q_new, info

    best, t, trace = bisect(t_min, t_max, settings.bisection_accuracy, probe)
    if best is None:
        return TrajectoryResult(q_prev.copy(), t_min, False, t_max, t_lit, trace, steps)
    return TrajectoryResult(best, t, True, t_max, t_lit, trace, steps)
