"""Instance builders shared by the test modules."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from risleo.channel import ArrayGeometry, LinkBudgetParams, StatisticalCsi
from risleo.geometry import ConstellationSpec, align_epoch, project_to_surface
from risleo.scene import RainSchedule, Scene, UeLayout, select_group
from risleo.trajectory import UavModel

REGION = project_to_surface(1e6 * np.array([-2.6610, 4.5050, -1.7249]))


def cn(rng, *shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / math.sqrt(2)


def synthetic_csi(
    K=2, S=1, n_t=2, M=2, seed=0, ris=1.0, noise=1.0, nu=10.0, direct=1.0, distance=50.0
) -> StatisticalCsi:
    """Well-conditioned statistics where the RIS path is comparable to the direct path."""
    rng = np.random.default_rng(seed)
    N = S * n_t
    F = np.full(K, ris)
    nus = np.full(K, nu)
    g_los = cn(rng, K, M)
    g_los /= np.linalg.norm(g_los, axis=1, keepdims=True)
    G_scale = np.full(N, 0.1 * ris)
    return StatisticalCsi(
        h_bar=direct * cn(rng, K, N),
        g_bar=np.sqrt(nus / (nus + 1))[:, None] * F[:, None] * g_los,
        G_bar=ris * cn(rng, M, N),
        a=F[:, None] * math.sqrt(M) * G_scale[None],
        b=np.full((K, N), 0.1 * direct),
        F=F,
        nu=nus,
        noise=np.full(K, noise),
        n_t=n_t,
        G_scale=G_scale,
        g_los=g_los,
        fading_coeff=F * distance,
        ris_distance=np.full(K, distance),
        cascade_factor=np.full(K, float(M)),
    )


@lru_cache(maxsize=8)
def _epoch(S: int, duration: float) -> float:
    return align_epoch(ConstellationSpec(), REGION, S, duration)


def realistic_scene(S=2, K=2, ris=(2, 4), sat=(2, 2), seed=0, v_max=5.0, duration=10.0, velocity=(0.0, 0.0)):
    """Table I constellation over the test region with random UEs; returns (scene, rain)."""
    spec = ConstellationSpec()
    epoch = _epoch(S, duration)
    group = select_group(spec, REGION, epoch, "scenario_group", S)
    link = LinkBudgetParams()
    lam = link.wavelength
    rng = np.random.default_rng(seed)
    pos = np.column_stack([rng.uniform(-150, 150, K), rng.uniform(150, 350, K), np.zeros(K)])
    vel = np.tile([velocity[0], velocity[1], 0.0], (K, 1))
    scene = Scene(
        spec,
        REGION,
        epoch,
        group,
        link,
        ArrayGeometry.half_wavelength(*sat, lam),
        ArrayGeometry.half_wavelength(*ris, lam),
        UavModel(v_max=v_max),
        UeLayout(pos, vel),
    )
    return scene, RainSchedule(seed, S, K, link)
