import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import cn
from risleo.bisection import BisectionTrace, bisect, is_rank_one, rank_one_residual
from risleo.conic import INFEASIBLE, SdpProblem, hermitian_from_real, max_eigpair, realify, smat, svec


def unit(n, i):
    E = np.zeros((n, n))
    E[i, i] = 1.0
    return E


class TestSdp:
    def test_minimal_trace(self):
        prob = SdpProblem()
        X = prob.add_hermitian(2)
        prob.add_linear({X: unit(2, 0)}, "==", 1.0)
        prob.set_objective({X: np.eye(2)})
        out = prob.solve()
        assert out.optimal and out.objective == pytest.approx(1.0, abs=1e-7)
        np.testing.assert_allclose(out.values[X], np.diag([1.0, 0.0]), atol=1e-6)

    def test_contradiction_is_infeasible(self):
        prob = SdpProblem()
        X = prob.add_hermitian(2)
        prob.add_linear({X: np.eye(2)}, "<=", 0.0)
        prob.add_linear({X: unit(2, 0)}, "==", 1.0)
        prob.set_objective({X: np.zeros((2, 2))})
        assert prob.solve().status == INFEASIBLE

    @pytest.mark.parametrize("seed", range(4))
    def test_injected_feasible_point(self, seed):
        rng = np.random.default_rng(seed)
        n = 3
        z = cn(rng, n)
        X0 = np.outer(z, z.conj()) + 0.1 * np.eye(n)
        prob = SdpProblem()
        X = prob.add_hermitian(n)
        rows = []
        for _ in range(4):
            A = cn(rng, n, n)
            A = A + A.conj().T
            rhs = float(np.real(np.trace(A @ X0)))
            prob.add_linear({X: A}, "<=", rhs + 0.5)
            rows.append((A, rhs + 0.5))
        prob.set_objective({X: np.eye(n)})
        out = prob.solve()
        assert out.optimal and out.max_violation <= 1e-6
        for A, rhs in rows:
            assert np.real(np.trace(A @ out.values[X])) <= rhs + 1e-6
        assert np.linalg.eigvalsh(out.values[X])[0] >= -1e-7
        assert out.objective <= np.real(np.trace(X0)) + 1e-6

    def test_complex_coupling(self):
        # maximise Im(X_12) with unit diagonal: optimum X_12 = 1j (rank one)
        prob = SdpProblem()
        X = prob.add_hermitian(2)
        for i in range(2):
            prob.add_linear({X: unit(2, i)}, "==", 1.0)
        C = np.array([[0, 0.5j], [-0.5j, 0]])
        prob.set_objective({X: -C})
        out = prob.solve()
        assert out.optimal
        # Re tr(C X) = Im(X_12)
        assert out.values[X][0, 1] == pytest.approx(1j, abs=1e-6)

    def test_soc_and_scalars(self):
        # min x0 + x1 s.t. ||(x0 - 1, x1 - 2)|| <= 1
        prob = SdpProblem()
        x = prob.add_scalars(2)
        prob.add_soc(({x: np.zeros(2)}, 1.0), [({x: np.array([1.0, 0])}, -1.0), ({x: np.array([0, 1.0])}, -2.0)])
        prob.set_objective({x: np.ones(2)})
        out = prob.solve()
        assert out.optimal
        np.testing.assert_allclose(out.values[x], [1 - 1 / math.sqrt(2), 2 - 1 / math.sqrt(2)], atol=1e-6)

    def test_rejects_non_hermitian(self):
        prob = SdpProblem()
        X = prob.add_hermitian(2)
        with pytest.raises(ValueError):
            prob.add_linear({X: np.array([[0, 1], [0, 0]])}, "<=", 1.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 5))
    def test_realify_round_trip(self, seed, n):
        rng = np.random.default_rng(seed)
        H = cn(rng, n, n)
        H = H + H.conj().T
        np.testing.assert_allclose(hermitian_from_real(realify(H)), H, atol=1e-12)
        Z = realify(H)
        np.testing.assert_allclose(smat(svec(Z), 2 * n), Z, atol=1e-12)


class TestEigpair:
    def test_identity(self):
        lam, v = max_eigpair(np.eye(4))
        assert lam == pytest.approx(1.0) and np.linalg.norm(v) == pytest.approx(1.0)

    def test_diagonal(self):
        lam, v = max_eigpair(np.diag([3.0, 1.0]))
        assert lam == 3.0 and abs(abs(v[0]) - 1.0) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_against_dense_solver(self, seed):
        rng = np.random.default_rng(seed)
        H = cn(rng, 5, 5)
        H = H + H.conj().T
        lam, v = max_eigpair(H)
        w = np.linalg.eigvals(H).real.max()
        assert lam == pytest.approx(w, rel=1e-9)
        np.testing.assert_allclose(H @ v, lam * v, atol=1e-9 * np.abs(H).max())


class TestBisection:
    def test_finds_threshold(self):
        best, t, trace = bisect(0.0, 8.0, 1e-3, lambda t: (t <= 3.3, t, {}))
        assert 3.3 - 1e-3 <= t <= 3.3 and best == t
        assert trace.iterations <= trace.iteration_bound

    def test_never_feasible(self):
        best, t, trace = bisect(1.0, 2.0, 1e-2, lambda t: (False, None, {}))
        assert best is None and t == 1.0

    def test_single_step_when_accuracy_spans_half(self):
        _, _, trace = bisect(0.0, 1.0, 0.5, lambda t: (True, t, {}))
        assert trace.iterations == 1

    def test_accuracy_equal_to_interval(self):
        _, _, trace = bisect(0.0, 1.0, 1.0, lambda t: (True, t, {}))
        assert trace.iterations == 0 and trace.iteration_bound == 0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.001, 10), st.floats(0, 1), st.floats(1e-4, 0.5))
    def test_iteration_bound(self, width, frac, acc):
        threshold = frac * width
        _, t, trace = bisect(0.0, width, acc, lambda t: (t <= threshold, t, {}))
        assert trace.iterations <= BisectionTrace(0.0, width, acc).iteration_bound
        assert t <= threshold + 1e-12 and threshold - t <= acc

    def test_bad_accuracy(self):
        with pytest.raises(ValueError):
            bisect(0, 1, 0, lambda t: (True, t, {}))

    def test_rank_one_checks(self):
        v = np.array([1.0, 2j, -1])
        X = np.outer(v, v.conj())
        assert is_rank_one(X, 1e-9)
        residual, trace = rank_one_residual(X + 0.1 * np.eye(3))
        assert residual == pytest.approx(0.2) and trace == pytest.approx(6.3)
