"""Max-min beamforming across the satellite group.

For a fixed target rate ``t`` the lifted problem asks for PSD matrices
``X_k`` meeting every UE's SINR target under the per-satellite power
budgets. A penalty ``tr(X_k) - u_k^H X_k u_k`` with ``u_k`` the previous
principal eigenvector pushes each ``X_k`` toward rank one; once every
residual is below the threshold the beamformers are read off the principal
eigenpairs. An outer bisection finds the largest certified ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bisection import BisectionTrace, SolverSettings, bisect, rank_one_residual
from .channel import StatisticalCsi
from .conic import SdpProblem, max_eigpair
from .rate import approx_sinrs, mrt_beamformer, quadratic_forms

TRIVIAL_TARGET = 1e-9


@dataclass
class LiftedBeamformers:
    feasible: bool
    X: np.ndarray | None = None  # (K, N, N) in watts
    residuals: np.ndarray | None = None
    traces: np.ndarray | None = None
    objectives: list[float] = field(default_factory=list)
    inner_iterations: int = 0
    reason: str = ""


@dataclass
class BeamformingResult:
    V: np.ndarray  # (N, K)
    t: float
    found: bool
    t_max: float
    trace: BisectionTrace


def beamforming_tmax(csi: StatisticalCsi, theta: np.ndarray, p_max: np.ndarray) -> float:
    """Single-user bound ``min_k log2(1 + P * lambda_max(W_k) / sigma_k^2)`` with P the group power."""
    W = quadratic_forms(csi, theta)
    lam = np.array([np.linalg.eigvalsh(Wk)[-1] for Wk in W])
    lam = np.maximum(lam, 0.0)
    return float(np.min(np.log2(1.0 + float(np.sum(p_max)) * lam / csi.noise)))


def _unit_columns(V: np.ndarray) -> np.ndarray:
    U = np.array(V, dtype=complex)
    for k in range(U.shape[1]):
        norm = np.linalg.norm(U[:, k])
        U[:, k] = U[:, k] / norm if norm > 0 else np.ones(U.shape[0]) / math.sqrt(U.shape[0])
    return U


def _selectors(N: int, n_t: int) -> list[np.ndarray]:
    out = []
    for s in range(N // n_t):
        d = np.zeros(N)
        d[s * n_t : (s + 1) * n_t] = 1.0
        out.append(np.diag(d))
    return out


def solve_p22(
    csi: StatisticalCsi,
    theta: np.ndarray,
    t: float,
    p_max: np.ndarray,
    V_prev: np.ndarray | None = None,
    settings: SolverSettings = SolverSettings(),
    W: np.ndarray | None = None,
) -> LiftedBeamformers:
    """Rank-one-penalised feasibility problem at fixed target ``t``."""
    if t < 0:
        raise ValueError("target rate must be non-negative")
    K, N = csi.K, csi.N
    p_max = np.asarray(p_max, dtype=float)
    if t <= TRIVIAL_TARGET:
        zeros = np.zeros((K, N, N), complex)
        return LiftedBeamformers(True, zeros, np.zeros(K), np.zeros(K), reason="trivial target")
    gamma = 2.0**t - 1.0
    W = quadratic_forms(csi, theta) if W is None else W
    p_ref = float(np.max(p_max))
    Wn = W * (p_ref / csi.noise)[:, None, None]
    row_scale = 1.0 / max(1.0, gamma)

    prob = SdpProblem()
    X = [prob.add_hermitian(N) for _ in range(K)]
    for k in range(K):
        terms = {X[l]: (Wn[k] if l == k else -gamma * Wn[k]) * row_scale for l in range(K)}
        prob.add_linear(terms, ">=", gamma * row_scale)
    for s, sel in enumerate(_selectors(N, csi.n_t)):
        prob.add_linear({X[k]: sel for k in range(K)}, "<=", p_max[s] / p_ref)

    dirs = _unit_columns(V_prev) if V_prev is not None else np.ones((N, K)) / math.sqrt(N)
    result = LiftedBeamformers(False)
    prev_obj = math.inf
    eye = np.eye(N)
    for j in range(settings.max_inner):
        prob.set_objective({X[k]: eye - np.outer(dirs[:, k], dirs[:, k].conj()) for k in range(K)})
        out = prob.solve(tol=settings.conic_tol, max_iter=settings.max_solver_iter)
        result.inner_iterations = j + 1
        if not out.optimal:
            result.reason = out.status
            return result
        mats = np.array([out.values[X[k]] for k in range(K)])
        res_tr = np.array([rank_one_residual(m) for m in mats])
        result.X = mats * p_ref
        result.residuals = res_tr[:, 0] * p_ref
        result.traces = res_tr[:, 1] * p_ref
        result.objectives.append(out.objective)
        if np.all(res_tr[:, 0] <= settings.rank_one_tol * np.maximum(res_tr[:, 1], 1e-12)):
            result.feasible = True
            result.reason = "rank one"
            return result
        if abs(prev_obj - out.objective) <= 1e-9 * max(1.0, abs(out.objective)):
            result.reason = "penalty stalled"
            return result
        prev_obj = out.objective
        dirs = np.column_stack([max_eigpair(m)[1] for m in mats])
    result.reason = "inner iteration cap"
    return result


def recover_beamformers(X: np.ndarray, p_max: np.ndarray, n_t: int) -> np.ndarray:
    """Principal-eigenpair beamformers, scaled down per satellite on any power overshoot."""
    V = np.column_stack([math.sqrt(max(lam, 0.0)) * u for lam, u in map(max_eigpair, X)])
    for s in range(V.shape[0] // n_t):
        rows = slice(s * n_t, (s + 1) * n_t)
        power = float(np.sum(np.abs(V[rows]) ** 2))
        if power > p_max[s] > 0:
            V[rows] *= math.sqrt(p_max[s] / power)
    return V


def lifted_sinrs(X: np.ndarray, W: np.ndarray, noise: np.ndarray) -> np.ndarray:
    T = np.real(np.einsum("kij,lji->kl", W, X))
    signal = np.diag(T).copy()
    return signal / (T.sum(axis=1) - signal + noise)


def design_beamforming(
    csi: StatisticalCsi,
    theta: np.ndarray,
    p_max: np.ndarray,
    t_min: float = 0.0,
    V_init: np.ndarray | None = None,
    settings: SolverSettings = SolverSettings(),
) -> BeamformingResult:
    """Bisection on the target rate between ``t_min`` and the single-user bound."""
    p_max = np.asarray(p_max, dtype=float)
    V0 = mrt_beamformer(csi, theta, p_max) if V_init is None else np.asarray(V_init, dtype=complex)
    W = quadratic_forms(csi, theta)
    t_max = beamforming_tmax(csi, theta, p_max)
    warm = {"V": V0}

    def probe(t):
        lifted = solve_p22(csi, theta, t, p_max, warm["V"], settings, W)
        info = {"reason": lifted.reason, "inner": lifted.inner_iterations}
        if not lifted.feasible:
            return False, None, info
        if t <= TRIVIAL_TARGET:
            return True, V0, info
        V = recover_beamformers(lifted.X, p_max, csi.n_t)
        certified = lifted_sinrs(lifted.X, W, csi.noise)
        achieved = approx_sinrs(csi, V, theta)
        info["residual_ratio"] = float(np.max(lifted.residuals / np.maximum(lifted.traces, 1e-300)))
        info["sinr_ratio"] = float(np.min(achieved / np.maximum(certified, 1e-300)))
        warm["V"] = V
        return True, V, info

    best, t, trace = bisect(t_min, t_max, settings.bisection_accuracy, probe)
    if best is None:
        return BeamformingResult(V0, t_min, False, t_max, trace)
    return BeamformingResult(best, t, True, t_max, trace)
