"""Rician link models for the satellite, satellite-to-RIS and RIS-to-UE hops.

The statistical CSI collects the LoS means and NLoS scales that enter the
closed-form rate; ``sample_channel`` draws instantaneous realisations from
the same model for Monte-Carlo checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import jv

from .constants import BOLTZMANN, SPEED_OF_LIGHT
from .geometry import LinkAngles, link_angles

RAIN_MODELS = ("lognormal_db", "normal_db")
CASCADE_MODELS = ("literal", "exact")


class DegenerateGeometry(ValueError):
    """Two link endpoints coincide."""


@dataclass(frozen=True)
class LinkBudgetParams:
    carrier_frequency: float = 30e9
    bandwidth: float = 25e6
    gain_over_temperature_db: float = 34.0  # G_k/T in dB/K
    noise_temperature: float = 300.0
    boltzmann: float = BOLTZMANN
    rain_mean_db: float = -2.6
    rain_var_db: float = 1.63
    rain_model: str = "lognormal_db"
    sat_gain_max_dbi: float = 20.0
    three_db_angle: float = math.radians(0.4)
    rician_direct: float = 30.0
    rician_sat_ris: float = 30.0
    rician_ris_ue: float = 10.0
    cascade_model: str = "literal"

    def __post_init__(self):
        if self.bandwidth <= 0 or self.carrier_frequency <= 0:
            raise ValueError("bandwidth and carrier frequency must be positive")
        if min(self.rician_direct, self.rician_sat_ris, self.rician_ris_ue) <= 0:
            raise ValueError("Rician factors must be positive")
        if self.rain_var_db < 0:
            raise ValueError("rain variance must be non-negative")
        if not 0 < self.three_db_angle < math.pi / 2:
            raise ValueError("three_db_angle must lie in (0, pi/2)")
        if self.rain_model not in RAIN_MODELS:
            raise ValueError(f"rain_model must be one of {RAIN_MODELS}")
        if self.cascade_model not in CASCADE_MODELS:
            raise ValueError(f"cascade_model must be one of {CASCADE_MODELS}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def ue_gain(self) -> float:
        return 10.0 ** (self.gain_over_temperature_db / 10.0) * self.noise_temperature

    @property
    def sat_gain_max(self) -> float:
        return 10.0 ** (self.sat_gain_max_dbi / 10.0)

    @property
    def noise_power(self) -> float:
        return self.boltzmann * self.bandwidth * self.noise_temperature

    @property
    def rain_std_db(self) -> float:
        return math.sqrt(self.rain_var_db)


@dataclass(frozen=True)
class ArrayGeometry:
    nx: int
    ny: int
    dx: float
    dy: float

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("array needs at least one element per axis")

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @classmethod
    def half_wavelength(cls, nx: int, ny: int, wavelength: float) -> "ArrayGeometry":
        return cls(nx, ny, wavelength / 2, wavelength / 2)


def upa_response(geom: ArrayGeometry, angles: LinkAngles, wavelength: float) -> np.ndarray:
    """Planar-array steering vector, x-axis response Kronecker y-axis response."""
    k = 2.0 * np.pi / wavelength
    cos_el = math.cos(angles.elevation)
    ax = np.exp(-1j * k * geom.dx * np.arange(geom.nx) * math.sin(angles.azimuth) * cos_el)
    ay = np.exp(-1j * k * geom.dy * np.arange(geom.ny) * cos_el)
    return np.kron(ax / math.sqrt(geom.nx), ay / math.sqrt(geom.ny))


def antenna_gain(off_axis: float, three_db_angle: float, b_max: float) -> float:
    """Satellite beam gain for an off-axis angle (cubed Bessel pattern)."""
    u = 2.071 * math.sin(off_axis) / math.sin(three_db_angle)
    if abs(u) < 1e-6:
        return b_max / 64.0
    return b_max * (jv(1, u) / (2 * u) + 36.0 * jv(3, u) / u) ** 3


def rain_attenuation(rng: np.random.Generator, mu_r: float, sigma_r: float, model: str = "lognormal_db", size=None):
    """Complex rain factor ``sqrt(xi) * exp(-j rho)``.

    ``lognormal_db`` draws ln(xi_dB) ~ N(mu_r, sigma_r^2); ``normal_db`` draws
    xi_dB ~ N(mu_r, sigma_r^2) directly. ``xi = 10**(xi_dB / 10)``.
    """
    if sigma_r < 0:
        raise ValueError("sigma_r must be non-negative")
    z = rng.normal(mu_r, sigma_r, size)
    xi_db = np.exp(z) if model == "lognormal_db" else z
    phase = rng.uniform(0.0, 2.0 * np.pi, size)
    return np.sqrt(10.0 ** (xi_db / 10.0)) * np.exp(-1j * phase)


@dataclass(frozen=True)
class RainDraws:
    direct: np.ndarray  # (S, K)
    ris: np.ndarray  # (S,)


def draw_rain(rng: np.random.Generator, S: int, K: int, params: LinkBudgetParams) -> RainDraws:
    direct = rain_attenuation(rng, params.rain_mean_db, params.rain_std_db, params.rain_model, (S, K))
    ris = rain_attenuation(rng, params.rain_mean_db, params.rain_std_db, params.rain_model, (S,))
    return RainDraws(np.asarray(direct), np.asarray(ris))


@dataclass(frozen=True)
class LinkGeometry:
    """Endpoint positions and array orientations for one slot (Earth-centred metres)."""

    sat_positions: np.ndarray  # (S, 3)
    sat_frames: np.ndarray  # (S, 3, 3)
    beam_centers: np.ndarray  # (S, 3) point each satellite beam is steered at
    ue_positions: np.ndarray  # (K, 3)
    ris_position: np.ndarray  # (3,)
    ris_frame: np.ndarray  # (3, 3)


@dataclass(frozen=True)
class StatisticalCsi:
    """Per-slot channel statistics; satellites are stacked along the antenna axis."""

    h_bar: np.ndarray  # (K, N) LoS direct means
    g_bar: np.ndarray  # (K, M) LoS RIS-to-UE means
    G_bar: np.ndarray  # (M, N) LoS satellite-to-RIS means
    a: np.ndarray  # (K, N) cascade NLoS scale
    b: np.ndarray  # (K, N) direct NLoS scale
    F: np.ndarray  # (K,) RIS-to-UE large-scale amplitude
    nu: np.ndarray  # (K,)
    noise: np.ndarray  # (K,)
    n_t: int  # antennas per satellite
    G_scale: np.ndarray  # (N,) NLoS std of each satellite-to-RIS column
    g_los: np.ndarray  # (K, M) unit-norm RIS-to-UE steering vectors
    fading_coeff: np.ndarray  # (K,) F_k times the RIS-to-UE distance
    ris_distance: np.ndarray  # (K,)
    cascade_factor: np.ndarray  # (K,) a_k = F_k * sqrt(cascade_factor) * G_scale

    @property
    def K(self) -> int:
        return self.h_bar.shape[0]

    @property
    def N(self) -> int:
        return self.h_bar.shape[1]

    @property
    def M(self) -> int:
        return self.g_bar.shape[1]

    @property
    def S(self) -> int:
        return self.N // self.n_t

    def effective_mean(self, theta: np.ndarray) -> np.ndarray:
        """Rows ``h_bar_k^H + g_bar_k^H Theta G_bar`` stacked to (K, N)."""
        phases = np.exp(1j * np.asarray(theta, dtype=float))
        return self.h_bar.conj() + (self.g_bar.conj() * phases) @ self.G_bar

    def without_ris(self) -> "StatisticalCsi":
        return replace(
            self,
            g_bar=np.zeros_like(self.g_bar),
            G_bar=np.zeros_like(self.G_bar),
            a=np.zeros_like(self.a),
            G_scale=np.zeros_like(self.G_scale),
            F=np.zeros_like(self.F),
            fading_coeff=np.zeros_like(self.fading_coeff),
        )

    def at_ris_distance(self, distance: np.ndarray) -> "StatisticalCsi":
        """Same angles, RIS-to-UE distances replaced (only inverse-distance factors move)."""
        distance = np.asarray(distance, dtype=float)
        F = self.fading_coeff / distance
        ratio = np.divide(F, self.F, out=np.zeros_like(F), where=self.F != 0)
        return replace(
            self,
            g_bar=self.g_bar * ratio[:, None],
            a=self.a * ratio[:, None],
            F=F,
            ris_distance=distance,
        )


def _off_axis(sat: np.ndarray, target: np.ndarray, center: np.ndarray) -> float:
    u = target - sat
    w = center - sat
    c = np.dot(u, w) / (np.linalg.norm(u) * np.linalg.norm(w))
    return math.acos(min(1.0, max(-1.0, c)))


def build_statistical_csi(
    geom: LinkGeometry,
    params: LinkBudgetParams,
    sat_array: ArrayGeometry,
    ris_array: ArrayGeometry,
    rain: RainDraws,
) -> StatisticalCsi:
    lam = params.wavelength
    G_k = params.ue_gain
    b_max = params.sat_gain_max
    kappa, kappa_r, nu = params.rician_direct, params.rician_sat_ris, params.rician_ris_ue
    S = geom.sat_positions.shape[0]
    K = geom.ue_positions.shape[0]
    n_t, M = sat_array.size, ris_array.size
    N = S * n_t

    h_bar = np.zeros((K, N), complex)
    b = np.zeros((K, N))
    G_bar = np.zeros((M, N), complex)
    G_scale = np.zeros(N)
    for s in range(S):
        sat = geom.sat_positions[s]
        cols = slice(s * n_t, (s + 1) * n_t)
        for k in range(K):
            ue = geom.ue_positions[k]
            d = np.linalg.norm(ue - sat)
            gain = antenna_gain(_off_axis(sat, ue, geom.beam_centers[s]), params.three_db_angle, b_max)
            L = lam / (4 * np.pi * d) * math.sqrt(G_k) * rain.direct[s, k] * np.sqrt(complex(gain))
            h_los = upa_response(sat_array, link_angles(sat, ue, geom.sat_frames[s]), lam)
            h_bar[k, cols] = math.sqrt(kappa / (kappa + 1)) * L * h_los
            b[k, cols] = abs(L) / math.sqrt(kappa + 1)
        d_r = np.linalg.norm(geom.ris_position - sat)
        gain = antenna_gain(_off_axis(sat, geom.ris_position, geom.beam_centers[s]), params.three_db_angle, b_max)
        L_r = lam / (4 * np.pi * d_r) * rain.ris[s] * np.sqrt(complex(gain))
        arrive = upa_response(ris_array, link_angles(geom.ris_position, sat, geom.ris_frame), lam)
        depart = upa_response(sat_array, link_angles(sat, geom.ris_position, geom.sat_frames[s]), lam)
        G_bar[:, cols] = math.sqrt(kappa_r / (kappa_r + 1)) * L_r * np.outer(arrive, depart.conj())
        G_scale[cols] = abs(L_r) / math.sqrt(kappa_r + 1)

    g_los = np.zeros((K, M), complex)
    dist = np.zeros(K)
    for k in range(K):
        ue = geom.ue_positions[k]
        dist[k] = np.linalg.norm(ue - geom.ris_position)
        if dist[k] < 1.0:
            raise DegenerateGeometry(f"RIS and UE {k} are {dist[k]:.3g} m apart")
        g_los[k] = upa_response(ris_array, link_angles(geom.ris_position, ue, geom.ris_frame), lam)
    coeff = np.full(K, lam / (4 * np.pi) * math.sqrt(G_k))
    F = coeff / dist
    nus = np.full(K, nu)
    g_bar = np.sqrt(nus / (nus + 1))[:, None] * F[:, None] * g_los
    if params.cascade_model == "literal":
        factor = np.full(K, float(M))
    else:
        factor = (nus + M) / (nus + 1)
    a = F[:, None] * np.sqrt(factor)[:, None] * G_scale[None, :]
    return StatisticalCsi(
        h_bar=h_bar,
        g_bar=g_bar,
        G_bar=G_bar,
        a=a,
        b=b,
        F=F,
        nu=nus,
        noise=np.full(K, params.noise_power),
        n_t=n_t,
        G_scale=G_scale,
        g_los=g_los,
        fading_coeff=coeff,
        ris_distance=dist,
        cascade_factor=factor,
    )


@dataclass(frozen=True)
class InstantChannel:
    h: np.ndarray  # (K, N)
    G: np.ndarray  # (M, N)
    g: np.ndarray  # (K, M)
    theta: np.ndarray  # (M,)
    f: np.ndarray  # (K, N) equivalent channel

    @staticmethod
    def compose(h, G, g, theta) -> np.ndarray:
        """``f_k = h_k + G^H Theta^H g_k`` for every UE (rows)."""
        phases = np.exp(-1j * np.asarray(theta, dtype=float))
        return h + (g * phases) @ G.conj()


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _nlos_scales(csi: StatisticalCsi):
    h_scale = csi.b  # (K, N)
    g_scale = csi.F / np.sqrt(csi.nu + 1)  # (K,)
    return h_scale, csi.G_scale, g_scale


def sample_channel(csi: StatisticalCsi, theta: np.ndarray, rng: np.random.Generator) -> InstantChannel:
    h_scale, G_scale, g_scale = _nlos_scales(csi)
    h = csi.h_bar + h_scale * _cn(rng, (csi.K, csi.N))
    G = csi.G_bar + G_scale[None, :] * _cn(rng, (csi.M, csi.N))
    g = csi.g_bar + g_scale[:, None] * _cn(rng, (csi.K, csi.M))
    theta = np.asarray(theta, dtype=float)
    return InstantChannel(h, G, g, theta, InstantChannel.compose(h, G, g, theta))


def sample_equivalent_channels(
    csi: StatisticalCsi, theta: np.ndarray, rng: np.random.Generator, n: int
) -> np.ndarray:
    """Batch of ``n`` equivalent channels, shape (n, K, N)."""
    h_scale, G_scale, g_scale = _nlos_scales(csi)
    phases = np.exp(-1j * np.asarray(theta, dtype=float))
    h = csi.h_bar[None] + h_scale[None] * _cn(rng, (n, csi.K, csi.N))
    G = csi.G_bar[None] + G_scale[None, None, :] * _cn(rng, (n, csi.M, csi.N))
    g = csi.g_bar[None] + g_scale[None, :, None] * _cn(rng, (n, csi.K, csi.M))
    return h + np.einsum("nkm,nmj->nkj", g * phases, G.conj())
