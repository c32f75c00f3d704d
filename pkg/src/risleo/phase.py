"""RIS phase design by lifted unit-modulus relaxation.

With ``phi = exp(j theta)`` as a row vector and ``phi_bar = [phi, 1]``, every
received-power term is ``phi_bar Xi phi_bar^H + Psi`` for a Hermitian block
matrix ``Xi`` and a scalar ``Psi``. Lifting ``y = phi_bar^H`` to
``Y = y y^H`` with unit diagonal makes each SINR target linear in ``Y``; the
same eigenvector penalty as the beamforming design pulls ``Y`` back to rank
one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beamforming import TRIVIAL_TARGET
from .bisection import BisectionTrace, SolverSettings, bisect, rank_one_residual
from .channel import StatisticalCsi
from .conic import SdpProblem, max_eigpair
from .rate import approx_sinrs


class DegenerateLift(ValueError):
    """The appended lift entry vanished, so no phase gauge can be fixed."""


@dataclass(frozen=True)
class PhaseBlocks:
    b: np.ndarray  # (K, K, M) b[k, l] = Phi_k v_l
    q: np.ndarray  # (K, K) direct-path amplitudes
    psi: np.ndarray  # (K, K) phase-independent power
    nlos: np.ndarray  # (K, K) NLoS and scattering part of psi

    @property
    def M(self) -> int:
        return self.b.shape[2]

    def xi(self, k: int, l: int) -> np.ndarray:
        """``[[b b^H, b conj(q)], [(b conj(q))^H, 0]]`` of size M + 1."""
        b = self.b[k, l]
        p = b * np.conj(self.q[k, l])
        M = self.M
        out = np.zeros((M + 1, M + 1), complex)
        out[:M, :M] = np.outer(b, b.conj())
        out[:M, M] = p
        out[M, :M] = p.conj()
        return out

    def term(self, k: int, l: int, theta: np.ndarray) -> float:
        """Direct evaluation of the received power of beam l at UE k."""
        return float(abs(self.q[k, l] + np.exp(1j * theta) @ self.b[k, l]) ** 2 + self.nlos[k, l])


def build_phase_blocks(csi: StatisticalCsi, V: np.ndarray) -> PhaseBlocks:
    V = np.asarray(V, dtype=complex)
    GV = csi.G_bar @ V  # (M, K)
    b = csi.g_bar.conj()[:, None, :] * GV.T[None, :, :]
    q = csi.h_bar.conj() @ V
    power = np.abs(V) ** 2
    scatter = (csi.F**2 / (csi.nu + 1))[:, None] * (np.linalg.norm(GV, axis=0) ** 2)[None, :]
    nlos = scatter + (csi.a**2) @ power + (csi.b**2) @ power
    return PhaseBlocks(b=b, q=q, psi=np.abs(q) ** 2 + nlos, nlos=nlos)


def phase_tmax(csi: StatisticalCsi, V: np.ndarray, blocks: PhaseBlocks | None = None) -> float:
    """Triangle-inequality bound on the signal over phase-independent interference."""
    blocks = build_phase_blocks(csi, V) if blocks is None else blocks
    K = csi.K
    diag = np.arange(K)
    coherent = (np.abs(blocks.q[diag, diag]) + np.abs(blocks.b[diag, diag]).sum(axis=1)) ** 2
    upper = coherent + blocks.nlos[diag, diag]
    interference = blocks.nlos.sum(axis=1) - blocks.nlos[diag, diag]
    return float(np.min(np.log2(1.0 + upper / (interference + csi.noise))))


def lift(theta: np.ndarray) -> np.ndarray:
    """Column ``y = conj([exp(j theta), 1])`` and hence ``Y = y y^H``."""
    return np.conj(np.append(np.exp(1j * np.asarray(theta, dtype=float)), 1.0))


def recover_phases(phi_bar: np.ndarray) -> np.ndarray:
    """Phases in [0, 2 pi) from a lifted row vector whose last entry sets the gauge."""
    phi_bar = np.asarray(phi_bar, dtype=complex)
    last = phi_bar[-1]
    if abs(last) < 1e-9:
        raise DegenerateLift("last lifted entry is numerically zero")
    rotated = phi_bar[:-1] * (abs(last) / last)
    return np.mod(np.angle(rotated), 2.0 * np.pi)


@dataclass
class LiftedPhase:
    feasible: bool
    Y: np.ndarray | None = None
    residual: float = math.nan
    objectives: list[float] = field(default_factory=list)
    inner_iterations: int = 0
    reason: str = ""


@dataclass
class PhaseResult:
    theta: np.ndarray
    t: float
    found: bool
    t_max: float
    trace: BisectionTrace


def solve_p32(
    blocks: PhaseBlocks,
    noise: np.ndarray,
    t: float,
    theta_prev: np.ndarray | None = None,
    settings: SolverSettings = SolverSettings(),
) -> LiftedPhase:
    """Rank-one-penalised unit-diagonal feasibility problem at fixed target ``t``."""
    if t < 0:
        raise ValueError("target rate must be non-negative")
    K, M = blocks.q.shape[0], blocks.M
    if t <= TRIVIAL_TARGET:
        y = lift(np.zeros(M) if theta_prev is None else theta_prev)
        return LiftedPhase(True, np.outer(y, y.conj()), 0.0, reason="trivial target")
    gamma = 2.0**t - 1.0

    prob = SdpProblem()
    Y = prob.add_hermitian(M + 1)
    for k in range(K):
        C = blocks.xi(k, k).astype(complex)
        const = blocks.psi[k, k]
        for l in range(K):
            if l != k:
                C -= gamma * blocks.xi(k, l)
                const -= gamma * blocks.psi[k, l]
        rhs = gamma * noise[k] - const
        # unit diagonal and Y >= 0 give |Y_ij| <= 1 and tr(Y) = M + 1, which caps tr(C Y)
        reach = min(np.abs(C).sum(), (M + 1) * np.linalg.eigvalsh(C)[-1])
        if reach < rhs - 1e-9 * max(abs(rhs), np.abs(C).max()):
            return LiftedPhase(False, reason="relaxation bound")
        scale = max(np.abs(C).max(), abs(rhs), 1e-300)
        prob.add_linear({Y: C / scale}, ">=", rhs / scale)
    for m in range(M + 1):
        E = np.zeros((M + 1, M + 1))
        E[m, m] = 1.0
        prob.add_linear({Y: E}, "==", 1.0)

    y = lift(np.zeros(M) if theta_prev is None else theta_prev) / math.sqrt(M + 1)
    result = LiftedPhase(False)
    prev_obj = math.inf
    for j in range(settings.max_inner):
        prob.set_objective({Y: -np.outer(y, y.conj())}, constant=float(M + 1))
        out = prob.solve(tol=settings.conic_tol, max_iter=settings.max_solver_iter)
        result.inner_iterations = j + 1
        if not out.optimal:
            result.reason = out.status
            return result
        Ymat = out.values[Y]
        residual, trace = rank_one_residual(Ymat)
        result.Y, result.residual = Ymat, residual / trace
        result.objectives.append(out.objective)
        if residual <= settings.rank_one_tol * max(trace, 1e-12):
            result.feasible = True
            result.reason = "rank one"
            return result
        if abs(prev_obj - out.objective) <= 1e-9 * max(1.0, abs(out.objective)):
            result.reason = "penalty stalled"
            return _round(blocks, noise, gamma, result, settings.rounding_draws)
        prev_obj = out.objective
        y = max_eigpair(Ymat)[1]
    result.reason = "inner iteration cap"
    return _round(blocks, noise, gamma, result, settings.rounding_draws)


def _min_sinr_margin(blocks: PhaseBlocks, noise: np.ndarray, theta: np.ndarray, gamma: float) -> float:
    T = np.abs(blocks.q + blocks.b @ np.exp(1j * theta)) ** 2 + blocks.nlos
    signal = np.diag(T)
    return float(np.min(signal - gamma * (T.sum(axis=1) - signal + noise)) / max(float(np.max(signal)), 1e-300))


def _polish(blocks: PhaseBlocks, noise: np.ndarray, theta: np.ndarray, gamma: float, sweeps: int = 3, points: int = 64):
    """Element-wise ascent on the worst target margin over a uniform phase grid."""
    theta = theta.copy()
    grid = np.exp(2j * np.pi * np.arange(points) / points)
    for _ in range(sweeps):
        for m in range(theta.size):
            e = np.exp(1j * theta)
            rest = blocks.q + blocks.b @ e - blocks.b[:, :, m] * e[m]
            T = np.abs(rest[:, :, None] + blocks.b[:, :, m, None] * grid) ** 2 + blocks.nlos[:, :, None]
            signal = np.einsum("kkg->kg", T)
            margin = np.min(signal - gamma * (T.sum(axis=1) - signal + noise[:, None]), axis=0)
            theta[m] = 2 * np.pi * int(np.argmax(margin)) / points
    return theta


def _round(blocks: PhaseBlocks, noise: np.ndarray, gamma: float, result: LiftedPhase, draws: int) -> LiftedPhase:
    """Look for a unit-modulus point when the penalty loop stops at a higher-rank solution.

    Candidates are the principal eigenvector and Gaussian draws shaped by the
    relaxed matrix; the best few are refined element by element. A candidate
    is accepted only if it meets every target exactly, and is returned as an
    exactly rank-one point.
    """
    if result.Y is None or draws <= 0:
        return result
    w, U = np.linalg.eigh(result.Y)
    root = U * np.sqrt(np.maximum(w, 0.0))
    rng = np.random.default_rng(0)  # fixed so that reruns certify the same points
    n = root.shape[0]
    vectors = [U[:, -1]] + [root @ ((rng.normal(size=n) + 1j * rng.normal(size=n)) / math.sqrt(2)) for _ in range(draws)]
    candidates = [recover_phases(np.conj(z)) for z in vectors if np.min(np.abs(z)) > 1e-12]
    candidates.sort(key=lambda th: -_min_sinr_margin(blocks, noise, th, gamma))
    for theta in candidates[:4]:
        if _min_sinr_margin(blocks, noise, theta, gamma) < 0:
            theta = _polish(blocks, noise, theta, gamma)
        if _min_sinr_margin(blocks, noise, theta, gamma) >= 0:
            y = lift(theta)
            result.feasible, result.Y, result.residual = True, np.outer(y, y.conj()), 0.0
            result.reason = f"rounding after {result.reason}"
            return result
    return result


def _lifted_sinrs(blocks: PhaseBlocks, Y: np.ndarray, noise: np.ndarray) -> np.ndarray:
    K = blocks.q.shape[0]
    T = np.array([[np.real(np.trace(Y @ blocks.xi(k, l))) + blocks.psi[k, l] for l in range(K)] for k in range(K)])
    signal = np.diag(T).copy()
    return signal / (T.sum(axis=1) - signal + noise)


def design_phase(
    csi: StatisticalCsi,
    V: np.ndarray,
    t_min: float = 0.0,
    theta_init: np.ndarray | None = None,
    settings: SolverSettings = SolverSettings(),
) -> PhaseResult:
    """Bisection on the target rate with the lifted phase problem as oracle."""
    theta0 = np.zeros(csi.M) if theta_init is None else np.mod(np.asarray(theta_init, dtype=float), 2 * np.pi)
    blocks = build_phase_blocks(csi, V)
    t_max = phase_tmax(csi, V, blocks)
    warm = {"theta": theta0}

    def probe(t):
        lifted = solve_p32(blocks, csi.noise, t, warm["theta"], settings)
        info = {"reason": lifted.reason, "inner": lifted.inner_iterations}
        if not lifted.feasible:
            return False, None, info
        if t <= TRIVIAL_TARGET:
            return True, theta0, info
        # Y = y y^H with y = conj(phi_bar), so the lifted row vector is conj of the eigenvector
        lam, vec = max_eigpair(lifted.Y)
        theta = recover_phases(np.conj(vec) * math.sqrt(max(lam, 0.0)))
        certified = _lifted_sinrs(blocks, lifted.Y, csi.noise)
        achieved = approx_sinrs(csi, V, theta)
        info["residual_ratio"] = lifted.residual
        info["sinr_ratio"] = float(np.min(achieved / np.maximum(certified, 1e-300)))
        info["slack"] = float(t - np.min(np.log2(1.0 + achieved)))
        warm["theta"] = theta
        return True, theta, info

    best, t, trace = bisect(t_min, t_max, settings.bisection_accuracy, probe)
    if best is None:
        return PhaseResult(theta0, t_min, False, t_max, trace)
    return PhaseResult(best, t, True, t_max, trace)
