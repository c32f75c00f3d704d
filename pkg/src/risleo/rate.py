"""Closed-form approximated ergodic rate and its Monte-Carlo reference."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import StatisticalCsi, sample_equivalent_channels


def link_terms(csi: StatisticalCsi, V: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Expected received power ``T[k, l]`` at UE k from the beam of UE l.

    Sum of the coherent LoS term, the RIS-to-UE scattering term and the two
    NLoS diagonal terms. ``V`` has one beamformer per column (N, K).
    """
    V = np.asarray(V, dtype=complex)
    coherent = np.abs(csi.effective_mean(theta) @ V) ** 2
    ris_scatter = (csi.F**2 / (csi.nu + 1))[:, None] * (np.linalg.norm(csi.G_bar @ V, axis=0) ** 2)[None, :]
    power = np.abs(V) ** 2
    nlos = (csi.a**2) @ power + (csi.b**2) @ power
    return coherent + ris_scatter + nlos


def sinr_from_terms(T: np.ndarray, noise: np.ndarray) -> np.ndarray:
    signal = np.diag(T).copy()
    interference = T.sum(axis=1) - signal
    return signal / (interference + noise)


def approx_sinrs(csi: StatisticalCsi, V: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return sinr_from_terms(link_terms(csi, V, theta), csi.noise)


def approx_sinr(csi: StatisticalCsi, V: np.ndarray, theta: np.ndarray, k: int) -> float:
    return float(approx_sinrs(csi, V, theta)[k])


def approx_rates(csi: StatisticalCsi, V: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return np.log2(1.0 + approx_sinrs(csi, V, theta))


def approx_min_rate(csi: StatisticalCsi, V: np.ndarray, theta: np.ndarray) -> tuple[float, int]:
    """Minimum per-UE approximated rate and the first UE attaining it."""
    rates = approx_rates(csi, V, theta)
    k = int(np.argmin(rates))
    return float(rates[k]), k


def quadratic_forms(csi: StatisticalCsi, theta: np.ndarray) -> np.ndarray:
    """Matrices ``W_k`` (K, N, N) with ``T[k, l] = v_l^H W_k v_l``."""
    E = csi.effective_mean(theta)
    coherent = np.einsum("ki,kj->kij", E.conj(), E)
    Q = csi.G_bar.conj().T @ csi.G_bar
    scatter = (csi.F**2 / (csi.nu + 1))[:, None, None] * Q[None]
    diag = np.zeros_like(coherent)
    idx = np.arange(csi.N)
    diag[:, idx, idx] = csi.a**2 + csi.b**2
    W = coherent + scatter + diag
    return 0.5 * (W + np.conj(np.transpose(W, (0, 2, 1))))


def _instant_sinr(f: np.ndarray, V: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Instantaneous SINR (n, K) for equivalent channels ``f`` (n, K, N)."""
    P = np.abs(np.einsum("nkj,jl->nkl", f.conj(), V)) ** 2
    signal = np.einsum("nkk->nk", P)
    return signal / (P.sum(axis=2) - signal + noise[None, :])


def mc_ergodic_rates(
    csi: StatisticalCsi,
    V: np.ndarray,
    theta: np.ndarray,
    n_samples: int = 10_000,
    rng: np.random.Generator | None = None,
    chunk: int = 2_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample-mean ergodic rate and standard error for every UE."""
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    rng = np.random.default_rng() if rng is None else rng
    V = np.asarray(V, dtype=complex)
    total = np.zeros(csi.K)
    total_sq = np.zeros(csi.K)
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        f = sample_equivalent_channels(csi, theta, rng, n)
        r = np.log2(1.0 + _instant_sinr(f, V, csi.noise))
        total += r.sum(axis=0)
        total_sq += (r**2).sum(axis=0)
        done += n
    mean = total / n_samples
    var = np.maximum(total_sq / n_samples - mean**2, 0.0) * n_samples / (n_samples - 1)
    return mean, np.sqrt(var / n_samples)


def mc_ergodic_rate(
    csi: StatisticalCsi,
    V: np.ndarray,
    theta: np.ndarray,
    k: int,
    n_samples: int = 10_000,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    mean, se = mc_ergodic_rates(csi, V, theta, n_samples, rng)
    return float(mean[k]), float(se[k])


@dataclass
class RateReport:
    approx_rates: np.ndarray
    min_rate: float
    argmin: int
    signal: np.ndarray
    interference: np.ndarray
    noise: np.ndarray
    mc_rates: np.ndarray | None = None
    mc_stderr: np.ndarray | None = None


def rate_report(
    csi: StatisticalCsi,
    V: np.ndarray,
    theta: np.ndarray,
    mc_samples: int = 0,
    rng: np.random.Generator | None = None,
) -> RateReport:
    T = link_terms(csi, V, theta)
    signal = np.diag(T).copy()
    interference = T.sum(axis=1) - signal
    rates = np.log2(1.0 + signal / (interference + csi.noise))
    k = int(np.argmin(rates))
    report = RateReport(rates, float(rates[k]), k, signal, interference, csi.noise.copy())
    if mc_samples:
        report.mc_rates, report.mc_stderr = mc_ergodic_rates(csi, V, theta, mc_samples, rng)
    return report


def mrt_beamformer(csi: StatisticalCsi, theta: np.ndarray, p_max: np.ndarray) -> np.ndarray:
    """Matched-filter directions on the mean channel, ``p_max[s] / K`` per satellite block."""
    E = csi.effective_mean(theta)
    K, n_t = csi.K, csi.n_t
    V = np.zeros((csi.N, K), complex)
    for s in range(csi.S):
        rows = slice(s * n_t, (s + 1) * n_t)
        for k in range(K):
            d = E[k, rows].conj()
            norm = np.linalg.norm(d)
            d = d / norm if norm > 0 else np.ones(n_t) / math.sqrt(n_t)
            V[rows, k] = math.sqrt(p_max[s] / K) * d
    return V


def per_satellite_power(V: np.ndarray, n_t: int) -> np.ndarray:
    power = np.sum(np.abs(V) ** 2, axis=1)
    return power.reshape(-1, n_t).sum(axis=1)
