import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import cn, synthetic_csi
from risleo.rate import (
    approx_min_rate,
    approx_rates,
    approx_sinrs,
    link_terms,
    mc_ergodic_rates,
    mrt_beamformer,
    per_satellite_power,
    quadratic_forms,
    rate_report,
)


def termwise_sinr(csi, V, theta, k):
    """Loop-by-loop evaluation of the four received-power terms."""
    K, N, M = csi.K, csi.N, csi.M
    theta_mat = np.diag(np.exp(1j * theta))

    def power(l):
        v = V[:, l]
        los = np.vdot(csi.h_bar[k], v) + csi.g_bar[k].conj() @ theta_mat @ csi.G_bar @ v
        scatter = csi.F[k] ** 2 / (csi.nu[k] + 1) * sum(abs(sum(csi.G_bar[m, n] * v[n] for n in range(N))) ** 2 for m in range(M))
        cascade = sum(csi.a[k, n] ** 2 * abs(v[n]) ** 2 for n in range(N))
        direct = sum(csi.b[k, n] ** 2 * abs(v[n]) ** 2 for n in range(N))
        return abs(los) ** 2 + scatter + cascade + direct

    interference = sum(power(l) for l in range(K) if l != k)
    return power(k) / (interference + csi.noise[k])


def random_instance(seed, K=2, S=1, n_t=2, M=2):
    csi = synthetic_csi(K=K, S=S, n_t=n_t, M=M, seed=seed)
    rng = np.random.default_rng(seed + 100)
    return csi, cn(rng, csi.N, K), rng.uniform(0, 2 * np.pi, M)


class TestApproxSinr:
    def test_zero_beamformers(self):
        csi = synthetic_csi()
        np.testing.assert_array_equal(approx_sinrs(csi, np.zeros((2, 2)), np.zeros(2)), 0.0)

    def test_single_user_denominator_is_noise(self):
        csi = synthetic_csi(K=1, noise=0.37)
        V = np.ones((2, 1))
        T = link_terms(csi, V, np.zeros(2))
        assert approx_sinrs(csi, V, np.zeros(2))[0] == T[0, 0] / 0.37

    @pytest.mark.parametrize("seed", range(5))
    def test_termwise_oracle(self, seed):
        csi, V, theta = random_instance(seed)
        for k in range(csi.K):
            assert approx_sinrs(csi, V, theta)[k] == pytest.approx(termwise_sinr(csi, V, theta, k), rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_quadratic_forms_match_terms(self, seed):
        csi, V, theta = random_instance(seed, K=3, S=2, n_t=2, M=3)
        W = quadratic_forms(csi, theta)
        T = np.real(np.einsum("il,kij,jl->kl", V.conj(), W, V))
        np.testing.assert_allclose(T, link_terms(csi, V, theta), rtol=1e-10)
        for Wk in W:
            np.testing.assert_allclose(Wk, Wk.conj().T)
            assert np.linalg.eigvalsh(Wk)[0] > -1e-12 * np.abs(Wk).max()


class TestMinRate:
    def test_unit_sinr(self):
        csi = synthetic_csi(K=2)
        # two UEs, orthogonal direct channels only, no RIS, unit SINR by construction
        csi = replace(
            csi.without_ris(), h_bar=np.eye(2, dtype=complex), b=np.zeros((2, 2)), noise=np.ones(2)
        )
        rate, _ = approx_min_rate(csi, np.eye(2), np.zeros(2))
        assert rate == 1.0

    def test_single_user(self):
        csi, V, theta = random_instance(3, K=1)
        assert approx_min_rate(csi, V, theta)[0] == approx_rates(csi, V, theta)[0]

    @pytest.mark.parametrize("seed", range(5))
    def test_elementwise_oracle(self, seed):
        csi, V, theta = random_instance(seed, K=3, S=2)
        rates = [math.log2(1 + termwise_sinr(csi, V, theta, k)) for k in range(3)]
        rate, k = approx_min_rate(csi, V, theta)
        assert rate == pytest.approx(min(rates), rel=1e-12) and k == int(np.argmin(rates))


class TestMonteCarlo:
    def test_deterministic_channel(self):
        csi = synthetic_csi(K=2, nu=1e30)
        csi = replace(csi, a=np.zeros_like(csi.a), b=np.zeros_like(csi.b), G_scale=np.zeros_like(csi.G_scale))
        V, theta = np.eye(2, dtype=complex), np.array([0.3, 1.2])
        mc, se = mc_ergodic_rates(csi, V, theta, 1000, np.random.default_rng(0))
        np.testing.assert_allclose(se, 0.0, atol=1e-10)
        # with no fading the ergodic rate is the rate of the mean channel
        np.testing.assert_allclose(mc, approx_rates(csi, V, theta), rtol=1e-9)

    def test_standard_error_scaling(self):
        csi, V, theta = random_instance(1)
        _, se1 = mc_ergodic_rates(csi, V, theta, 20_000, np.random.default_rng(1))
        _, se2 = mc_ergodic_rates(csi, V, theta, 40_000, np.random.default_rng(2))
        np.testing.assert_allclose(se2 / se1, 1 / math.sqrt(2), rtol=0.05)

    def test_closed_form_close_to_mc(self):
        csi, V, theta = random_instance(2)
        mc, se = mc_ergodic_rates(csi, V, theta, 10_000, np.random.default_rng(3))
        approx = approx_rates(csi, V, theta)
        assert np.all(np.abs(approx - mc) <= np.maximum(3 * se, 0.1))

    def test_seeded(self):
        csi, V, theta = random_instance(2)
        a = mc_ergodic_rates(csi, V, theta, 500, np.random.default_rng(4))
        b = mc_ergodic_rates(csi, V, theta, 500, np.random.default_rng(4))
        np.testing.assert_array_equal(a[0], b[0])

    def test_too_few_samples(self):
        csi, V, theta = random_instance(2)
        with pytest.raises(ValueError):
            mc_ergodic_rates(csi, V, theta, 10)

    def test_report(self):
        csi, V, theta = random_instance(5)
        rep = rate_report(csi, V, theta, mc_samples=1000, rng=np.random.default_rng(0))
        assert rep.min_rate == pytest.approx(np.min(rep.approx_rates))
        assert rep.mc_rates.shape == (csi.K,)


class TestMrt:
    @pytest.mark.parametrize("seed", range(3))
    def test_power_budget(self, seed):
        csi, _, theta = random_instance(seed, K=3, S=2)
        p_max = np.array([2.0, 0.5])
        V = mrt_beamformer(csi, theta, p_max)
        assert np.all(per_satellite_power(V, csi.n_t) <= p_max * (1 + 1e-12))
        assert approx_min_rate(csi, V, theta)[0] > 0
