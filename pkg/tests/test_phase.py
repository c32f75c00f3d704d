import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import cn, synthetic_csi
from risleo.bisection import SolverSettings
from risleo.phase import (
    DegenerateLift,
    build_phase_blocks,
    design_phase,
    lift,
    phase_tmax,
    recover_phases,
    solve_p32,
)
from risleo.rate import approx_min_rate, approx_rates, link_terms

ACC = SolverSettings().bisection_accuracy


def grid_best(csi, V, points=64):
    grid = 2 * np.pi * np.arange(points) / points
    best = -math.inf
    for theta in itertools.product(grid, repeat=csi.M):
        best = max(best, approx_min_rate(csi, V, np.array(theta))[0])
    return best


def instance(seed, K=2, M=2, S=1, n_t=2):
    csi = synthetic_csi(K=K, S=S, n_t=n_t, M=M, seed=seed)
    V = cn(np.random.default_rng(seed + 50), csi.N, K)
    return csi, V


class TestBlocks:
    def test_zero_beamformers(self):
        csi = synthetic_csi()
        blocks = build_phase_blocks(csi, np.zeros((2, 2)))
        assert np.all(blocks.b == 0) and np.all(blocks.psi == 0)

    def test_scalar_lift_by_hand(self):
        csi, V = instance(1, K=1, M=1)
        blocks = build_phase_blocks(csi, V)
        b = np.conj(csi.g_bar[0, 0]) * (csi.G_bar @ V[:, 0])[0]
        q = np.vdot(csi.h_bar[0], V[:, 0])
        Xi = blocks.xi(0, 0)
        np.testing.assert_allclose(Xi, [[abs(b) ** 2, b * np.conj(q)], [np.conj(b) * q, 0]], atol=1e-14)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_lifted_form_matches_terms(self, seed):
        csi, V = instance(seed, K=3, M=3, S=2)
        theta = np.random.default_rng(seed).uniform(0, 2 * np.pi, 3)
        blocks = build_phase_blocks(csi, V)
        y = lift(theta)
        T = link_terms(csi, V, theta)
        for k, l in itertools.product(range(3), repeat=2):
            lifted = np.real(y.conj() @ blocks.xi(k, l) @ y) + blocks.psi[k, l]
            assert lifted == pytest.approx(T[k, l], rel=1e-10)
            assert blocks.term(k, l, theta) == pytest.approx(T[k, l], rel=1e-10)

    def test_no_ris_collapses_to_direct(self):
        csi, V = instance(2)
        blocks = build_phase_blocks(csi.without_ris(), V)
        assert np.all(blocks.b == 0)
        direct = np.abs(csi.h_bar.conj() @ V) ** 2 + (csi.b**2) @ (np.abs(V) ** 2)
        np.testing.assert_allclose(blocks.psi, direct)


class TestBound:
    def test_single_user_has_no_interference(self):
        csi, V = instance(3, K=1)
        blocks = build_phase_blocks(csi, V)
        upper = (abs(blocks.q[0, 0]) + np.abs(blocks.b[0, 0]).sum()) ** 2 + blocks.nlos[0, 0]
        assert phase_tmax(csi, V) == pytest.approx(math.log2(1 + upper / csi.noise[0]))

    @pytest.mark.parametrize("seed", range(4))
    def test_bound_holds_for_random_phases(self, seed):
        csi, V = instance(seed, K=2, M=4)
        bound = phase_tmax(csi, V)
        rng = np.random.default_rng(seed)
        for _ in range(200):
            assert approx_min_rate(csi, V, rng.uniform(0, 2 * np.pi, 4))[0] <= bound + 1e-12


class TestRecover:
    def test_all_ones(self):
        np.testing.assert_array_equal(recover_phases(np.ones(4)), 0.0)

    def test_quarter_turn(self):
        assert recover_phases(np.array([1j, 1.0]))[0] == pytest.approx(math.pi / 2)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 6))
    def test_round_trip(self, seed, M):
        rng = np.random.default_rng(seed)
        phi_bar = np.append(np.exp(1j * rng.uniform(0, 2 * np.pi, M)), 1.0)
        theta = recover_phases(phi_bar)
        y = lift(theta)
        # the lifted matrix built from the recovered phases is phi_bar^H phi_bar
        np.testing.assert_allclose(np.outer(y, y.conj()), np.outer(phi_bar.conj(), phi_bar), atol=1e-12)

    def test_gauge_invariance(self):
        phi_bar = np.array([np.exp(0.3j), np.exp(2.0j), 1.0])
        np.testing.assert_allclose(recover_phases(phi_bar * np.exp(0.9j)), recover_phases(phi_bar))

    def test_degenerate(self):
        with pytest.raises(DegenerateLift):
            recover_phases(np.array([1.0, 0.0]))


class TestLiftedProblem:
    def test_zero_target(self):
        csi, V = instance(4)
        lifted = solve_p32(build_phase_blocks(csi, V), csi.noise, 0.0)
        assert lifted.feasible
        np.testing.assert_allclose(np.diag(lifted.Y).real, 1.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_grid_optimum_inside_feasible_range(self, seed):
        csi, V = instance(seed, K=1, M=2)
        best = grid_best(csi, V)
        lifted = solve_p32(build_phase_blocks(csi, V), csi.noise, best - ACC)
        assert lifted.feasible

    def test_above_bound_infeasible(self):
        csi, V = instance(5)
        lifted = solve_p32(build_phase_blocks(csi, V), csi.noise, phase_tmax(csi, V) + 0.05)
        assert not lifted.feasible

    def test_screen_rejects_without_solving(self):
        # a negligible RIS path cannot lift the rate far above the direct-link value
        csi, V = instance(8)
        weak = replace(csi, g_bar=1e-6 * csi.g_bar)
        t = approx_min_rate(weak, V, np.zeros(2))[0] + 0.05
        lifted = solve_p32(build_phase_blocks(weak, V), weak.noise, t)
        assert not lifted.feasible and lifted.reason == "relaxation bound"

    def test_rounding_certifies_stalled_targets(self):
        # this instance stalls the penalty loop at a rank-two point below its grid optimum
        csi = synthetic_csi(K=2, S=1, n_t=2, M=2, seed=6)
        V = cn(np.random.default_rng(56), csi.N, 2)
        blocks = build_phase_blocks(csi, V)
        lifted = solve_p32(blocks, csi.noise, 0.95, settings=SolverSettings(max_inner=2))
        assert lifted.feasible and lifted.reason.startswith("rounding")
        theta = recover_phases(np.conj(np.linalg.eigh(lifted.Y)[1][:, -1]))
        assert approx_min_rate(csi, V, theta)[0] >= 0.95
        refused = solve_p32(blocks, csi.noise, 0.95, settings=SolverSettings(max_inner=2, rounding_draws=0))
        assert not refused.feasible


class TestDesign:
    @pytest.mark.parametrize("seed", range(3))
    def test_scalar_alignment(self, seed):
        csi = synthetic_csi(K=1, S=1, n_t=1, M=1, seed=seed)
        V = np.ones((1, 1), complex)
        q = np.conj(csi.h_bar[0, 0]) * V[0, 0]
        b = np.conj(csi.g_bar[0, 0]) * (csi.G_bar @ V[:, 0])[0]
        theta_star = np.array([np.angle(q) - np.angle(b)])
        optimum = approx_rates(csi, V, theta_star)[0]
        res = design_phase(csi, V)
        assert res.found and abs(approx_rates(csi, V, res.theta)[0] - optimum) <= ACC

    def test_dead_ris_link(self):
        csi, V = instance(6)
        dead = replace(csi, g_bar=np.zeros_like(csi.g_bar))
        res = design_phase(dead, V)
        no_ris = approx_min_rate(dead, V, np.zeros(2))[0]
        assert abs(approx_min_rate(dead, V, res.theta)[0] - no_ris) <= ACC

    @pytest.mark.parametrize("seed", range(2))
    def test_dominates_random_phases(self, seed):
        csi, V = instance(seed, K=2, M=3)
        res = design_phase(csi, V)
        designed = approx_min_rate(csi, V, res.theta)[0]
        rng = np.random.default_rng(seed)
        draws = [approx_min_rate(csi, V, rng.uniform(0, 2 * np.pi, 3))[0] for _ in range(100)]
        assert designed >= max(draws) - ACC
        for step in res.trace.accepted:
            if "residual_ratio" in step.info:
                assert step.info["residual_ratio"] <= 1e-6 and step.info["sinr_ratio"] >= 0.99

    def test_respects_iteration_bound(self):
        csi, V = instance(7)
        res = design_phase(csi, V)
        assert res.trace.iterations <= res.trace.iteration_bound
