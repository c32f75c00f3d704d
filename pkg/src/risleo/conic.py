"""Small conic-program builder over Clarabel.

Complex Hermitian matrix variables are realified with the block embedding
``Z = [[Re X, -Im X], [Im X, Re X]]`` and stored as scaled upper-triangle
vectors, which is the layout Clarabel's PSD cone expects. Constraints are
written as linear maps of the variables, so ``tr(C X)`` for a Hermitian
``C`` becomes ``<svec(C_r / 2), svec(Z)>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import clarabel
import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"

_INFEASIBLE_STATUSES = {"PrimalInfeasible", "AlmostPrimalInfeasible"}
_SOLVED_STATUSES = {"Solved", "AlmostSolved"}


@lru_cache(maxsize=64)
def _triangle(m: int):
    """Row/col indices and sqrt(2) scaling of the column-major upper triangle."""
    cols, rows = [], []
    for j in range(m):
        rows.extend(range(j + 1))
        cols.extend([j] * (j + 1))
    rows = np.array(rows)
    cols = np.array(cols)
    scale = np.where(rows == cols, 1.0, math.sqrt(2.0))
    return rows, cols, scale


def realify(C: np.ndarray) -> np.ndarray:
    C = np.asarray(C)
    return np.block([[C.real, -C.imag], [C.imag, C.real]])


def svec(A: np.ndarray) -> np.ndarray:
    rows, cols, scale = _triangle(A.shape[0])
    return A[rows, cols] * scale


def smat(x: np.ndarray, m: int) -> np.ndarray:
    rows, cols, scale = _triangle(m)
    Z = np.zeros((m, m))
    Z[rows, cols] = x / scale
    Z[cols, rows] = x / scale
    return Z


def hermitian_from_real(Z: np.ndarray) -> np.ndarray:
    n = Z.shape[0] // 2
    X = 0.5 * (Z[:n, :n] + Z[n:, n:]) + 0.5j * (Z[n:, :n] - Z[:n, n:])
    return 0.5 * (X + X.conj().T)


@dataclass
class _Block:
    kind: str  # "hermitian" or "scalar"
    size: int
    offset: int
    length: int


@dataclass
class SolveOutcome:
    status: str
    values: dict = field(default_factory=dict)
    objective: float = math.nan
    max_violation: float = math.inf
    iterations: int = 0
    solver_status: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class SdpProblem:
    """Linear objective, linear and second-order-cone constraints, PSD matrix variables.

    Terms are dictionaries mapping a variable handle to its coefficient: a
    Hermitian matrix for matrix variables (meaning ``Re tr(C X)``) or a
    real vector for scalar blocks (meaning ``c @ x``).
    """

    def __init__(self):
        self._blocks: list[_Block] = []
        self._n = 0
        self._eq: list[tuple[np.ndarray, float]] = []
        self._le: list[tuple[np.ndarray, float]] = []
        self._soc: list[list[tuple[np.ndarray, float]]] = []
        self._objective = None
        self._objective_const = 0.0

    # variables -------------------------------------------------------------
    def add_hermitian(self, n: int) -> int:
        m = 2 * n
        length = m * (m + 1) // 2
        self._blocks.append(_Block("hermitian", n, self._n, length))
        self._n += length
        return len(self._blocks) - 1

    def add_scalars(self, n: int) -> int:
        self._blocks.append(_Block("scalar", n, self._n, n))
        self._n += n
        return len(self._blocks) - 1

    # rows ------------------------------------------------------------------
    def _row(self, terms: dict) -> np.ndarray:
        row = np.zeros(self._n)
        for handle, coeff in terms.items():
            blk = self._blocks[handle]
            if blk.kind == "hermitian":
                C = np.asarray(coeff)
                if C.shape != (blk.size, blk.size):
                    raise ValueError(f"coefficient shape {C.shape} does not match variable size {blk.size}")
                if not np.allclose(C, C.conj().T, atol=1e-12 * max(1.0, np.abs(C).max())):
                    raise ValueError("matrix coefficients must be Hermitian")
                row[blk.offset : blk.offset + blk.length] += svec(0.5 * realify(C))
            else:
                c = np.asarray(coeff, dtype=float)
                if c.shape != (blk.size,):
                    raise ValueError(f"coefficient length {c.shape} does not match block size {blk.size}")
                row[blk.offset : blk.offset + blk.length] += c
        return row

    def add_linear(self, terms: dict, sense: str, rhs: float) -> None:
        row = self._row(terms)
        if sense == "==":
            self._eq.append((row, float(rhs)))
        elif sense == "<=":
            self._le.append((row, float(rhs)))
        elif sense == ">=":
            self._le.append((-row, -float(rhs)))
        else:
            raise ValueError(f"unknown sense {sense!r}")

    def add_soc(self, head: tuple[dict, float], tail: list[tuple[dict, float]]) -> None:
        """``||(tail_i . x + d_i)_i|| <= head . x + d_0``."""
        rows = [(self._row(head[0]), float(head[1]))]
        rows += [(self._row(t), float(c)) for t, c in tail]
        self._soc.append(rows)

    def set_objective(self, terms: dict, constant: float = 0.0) -> None:
        self._objective = self._row(terms)
        self._objective_const = float(constant)

    # solve -----------------------------------------------------------------
    def _assemble(self):
        A_rows, b, cones = [], [], []
        if self._eq:
            A_rows += [r for r, _ in self._eq]
            b += [c for _, c in self._eq]
            cones.append(clarabel.ZeroConeT(len(self._eq)))
        if self._le:
            A_rows += [r for r, _ in self._le]
            b += [c for _, c in self._le]
            cones.append(clarabel.NonnegativeConeT(len(self._le)))
        for rows in self._soc:
            A_rows += [-r for r, _ in rows]
            b += [c for _, c in rows]
            cones.append(clarabel.SecondOrderConeT(len(rows)))
        A = sp.csc_matrix(np.array(A_rows)) if A_rows else sp.csc_matrix((0, self._n))
        blocks = []
        for blk in self._blocks:
            if blk.kind == "hermitian":
                idx = np.arange(blk.length)
                blocks.append(
                    sp.csc_matrix((-np.ones(blk.length), (idx, blk.offset + idx)), shape=(blk.length, self._n))
                )
                b += [0.0] * blk.length
                cones.append(clarabel.PSDTriangleConeT(2 * blk.size))
        if blocks:
            A = sp.vstack([A] + blocks, format="csc")
        return A, np.array(b, dtype=float), cones

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint violation at ``x``, relative to the data scale."""
        worst = 0.0
        for row, rhs in self._eq:
            worst = max(worst, abs(row @ x - rhs) / max(1.0, abs(rhs)))
        for row, rhs in self._le:
            worst = max(worst, (row @ x - rhs) / max(1.0, abs(rhs)))
        for rows in self._soc:
            vals = np.array([r @ x + c for r, c in rows])
            worst = max(worst, (np.linalg.norm(vals[1:]) - vals[0]) / max(1.0, abs(vals[0])))
        for blk in self._blocks:
            if blk.kind == "hermitian":
                Z = smat(x[blk.offset : blk.offset + blk.length], 2 * blk.size)
                lam_min = np.linalg.eigvalsh(Z)[0]
                worst = max(worst, -lam_min / max(1.0, np.abs(Z).max()))
        return float(worst)

    def solve(self, tol: float = 1e-8, max_iter: int = 200, violation_tol: float = 1e-6) -> SolveOutcome:
        A, b, cones = self._assemble()
        n = self._n
        P = sp.csc_matrix((n, n))
        q = self._objective if self._objective is not None else np.zeros(n)
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_feas = tol
        settings.tol_gap_abs = tol
        settings.tol_gap_rel = tol
        settings.tol_infeas_abs = tol
        settings.tol_infeas_rel = tol
        settings.max_iter = max_iter
        try:
            solution = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
        except Exception as exc:  # solver breakdown surfaces as a status, never an exception
            return SolveOutcome(NUMERICAL_FAILURE, solver_status=f"error: {exc}")
        raw = str(solution.status)
        x = np.asarray(solution.x, dtype=float)
        outcome = SolveOutcome(NUMERICAL_FAILURE, iterations=int(solution.iterations), solver_status=raw)
        if raw in _INFEASIBLE_STATUSES:
            outcome.status = INFEASIBLE
            return outcome
        if raw not in _SOLVED_STATUSES:
            return outcome
        outcome.max_violation = self.violation(x)
        if outcome.max_violation > violation_tol:
            return outcome
        outcome.status = OPTIMAL
        outcome.objective = float(q @ x) + self._objective_const
        for handle, blk in enumerate(self._blocks):
            chunk = x[blk.offset : blk.offset + blk.length]
            if blk.kind == "hermitian":
                outcome.values[handle] = hermitian_from_real(smat(chunk, 2 * blk.size))
            else:
                outcome.values[handle] = chunk.copy()
        return outcome


def solve(problem: SdpProblem, tol: float = 1e-8, max_iter: int = 200) -> SolveOutcome:
    return problem.solve(tol=tol, max_iter=max_iter)


def max_eigpair(H: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of a Hermitian matrix and a unit eigenvector."""
    H = np.asarray(H)
    H = 0.5 * (H + H.conj().T)
    w, U = np.linalg.eigh(H)
    return float(w[-1]), U[:, -1]
