"""Bisection over a monotone feasibility oracle, shared by the three block designs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


@dataclass
class BisectionStep:
    t: float
    feasible: bool
    info: dict = field(default_factory=dict)


@dataclass
class BisectionTrace:
    t_lower: float
    t_upper: float
    accuracy: float
    steps: list[BisectionStep] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.steps)

    @property
    def iteration_bound(self) -> int:
        gap = self.t_upper - self.t_lower
        if gap <= self.accuracy:
            return 0
        return math.ceil(math.log2(gap / self.accuracy)) + 1

    @property
    def accepted(self) -> list[BisectionStep]:
        return [s for s in self.steps if s.feasible]


def bisect(
    t_lower: float,
    t_upper: float,
    accuracy: float,
    probe: Callable[[float], tuple[bool, Any, dict]],
) -> tuple[Any, float, BisectionTrace]:
    """Largest certified ``t`` within ``accuracy``.

    ``probe(t)`` returns ``(feasible, payload, info)``. Returns the payload of
    the last feasible probe (``None`` if none was), the final lower end and
    the trace.
    """
    if accuracy <= 0:
        raise ValueError("accuracy must be positive")
    trace = BisectionTrace(t_lower, t_upper, accuracy)
    best = None
    lo, hi = t_lower, t_upper
    while hi - lo > accuracy:
        t = 0.5 * (lo + hi)
        feasible, payload, info = probe(t)
        trace.steps.append(BisectionStep(t, feasible, info))
        if feasible:
            lo, best = t, payload
        else:
            hi = t
    return best, lo, trace


@dataclass(frozen=True)
class SolverSettings:
    """Knobs shared by the beamforming, phase and trajectory designs."""

    bisection_accuracy: float = 1e-3
    rank_one_tol: float = 1e-6
    max_inner: int = 15
    conic_tol: float = 1e-8
    max_solver_iter: int = 200
    rounding_draws: int = 64  # randomised candidates tried when the penalty loop stalls


def rank_one_residual(X) -> tuple[float, float]:
    """``tr(X) - lambda_max(X)`` and ``tr(X)`` of a Hermitian PSD matrix."""
    w = np.linalg.eigvalsh(0.5 * (X + X.conj().T))
    trace = float(np.real(np.trace(X)))
    return trace - float(w[-1]), trace


def is_rank_one(X, tol: float) -> bool:
    residual, trace = rank_one_residual(X)
    return residual <= tol * max(trace, 1e-12)
