"""Physical scenes: a satellite group over a region, moving UEs and the RIS-UAV.

Local coordinates are east/north/up metres about the region centre, which is
also the UAV charging station. The cooperating group is chosen once per frame
at the aligned epoch and then followed as it moves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ao import SlotScene
from .channel import (
    ArrayGeometry,
    LinkBudgetParams,
    LinkGeometry,
    RainDraws,
    StatisticalCsi,
    build_statistical_csi,
    draw_rain,
)
from .geometry import (
    ConstellationSpec,
    GroupSelection,
    PatternUnavailable,
    SatelliteState,
    build_walker_delta,
    enu_frame,
    local_to_ecef,
    satellite_frame,
    top_elevation_group,
    visible_group,
    walker_arrays,
)
from .trajectory import UavModel, uav_position

RAIN_CADENCES = ("frame", "slot")
RAIN_STREAM = 1  # stream id under the master seed


@dataclass(frozen=True)
class UeLayout:
    positions: np.ndarray  # (K, 3) local metres at the frame start
    velocities: np.ndarray  # (K, 3) local m/s

    @property
    def K(self) -> int:
        return self.positions.shape[0]

    def at(self, time: float) -> np.ndarray:
        return self.positions + time * self.velocities


@dataclass(frozen=True)
class Scene:
    spec: ConstellationSpec
    region_center: np.ndarray  # Earth-centred, on the sphere
    epoch: float
    group: GroupSelection
    link: LinkBudgetParams
    sat_array: ArrayGeometry
    ris_array: ArrayGeometry
    uav: UavModel
    ues: UeLayout

    @property
    def S(self) -> int:
        return len(self.group.members)

    @property
    def K(self) -> int:
        return self.ues.K

    def time_of(self, slot: int) -> float:
        return slot * self.uav.slot_duration

    def satellites(self, slot: int) -> list[SatelliteState]:
        pos, vel, planes, slots = walker_arrays(self.spec, self.epoch + self.time_of(slot))
        return [SatelliteState(pos[i], vel[i], int(planes[i]), int(slots[i])) for i in self.group.members]

    def ue_positions(self, slot: int) -> np.ndarray:
        return self.ues.at(self.time_of(slot))

    def geometry(self, slot: int, q: np.ndarray) -> LinkGeometry:
        sats = self.satellites(slot)
        ue = local_to_ecef(self.region_center, self.ue_positions(slot))
        ris = local_to_ecef(self.region_center, uav_position(q, self.uav))
        return LinkGeometry(
            sat_positions=np.array([s.position for s in sats]),
            sat_frames=np.array([satellite_frame(s) for s in sats]),
            beam_centers=np.tile(self.region_center, (len(sats), 1)),
            ue_positions=np.atleast_2d(ue),
            ris_position=ris,
            ris_frame=enu_frame(self.region_center),
        )

    def csi(self, slot: int, q: np.ndarray, rain: RainDraws) -> StatisticalCsi:
        return build_statistical_csi(self.geometry(slot, q), self.link, self.sat_array, self.ris_array, rain)

    def slot_scene(self, slot: int, rain: RainDraws) -> SlotScene:
        return SlotScene(self.ue_positions(slot), lambda q: self.csi(slot, q, rain))


def select_group(
    spec: ConstellationSpec, region_center: np.ndarray, epoch: float, strategy: str, S: int
) -> GroupSelection:
    """Cooperating satellites at ``epoch``; falls back to the top-S by elevation."""
    states = build_walker_delta(spec, epoch)
    if strategy != "scenario_group":
        return visible_group(states, region_center, spec.min_elevation, strategy, 1, spec)
    if S == 1:
        return visible_group(states, region_center, spec.min_elevation, "max_elevation", 1, spec)
    try:
        return visible_group(states, region_center, spec.min_elevation, strategy, S, spec)
    except PatternUnavailable:
        return top_elevation_group(states, region_center, spec.min_elevation, S)


class RainSchedule:
    """Rain draws per slot from one seeded stream, redrawn per frame or per slot."""

    def __init__(self, seed: int, S: int, K: int, link: LinkBudgetParams, cadence: str = "frame"):
        if cadence not in RAIN_CADENCES:
            raise ValueError(f"cadence must be one of {RAIN_CADENCES}")
        self._seed, self._S, self._K, self._link, self._cadence = seed, S, K, link, cadence
        self._cache: dict[int, RainDraws] = {}

    def __call__(self, slot: int) -> RainDraws:
        key = 0 if self._cadence == "frame" else slot
        if key not in self._cache:
            rng = np.random.default_rng([self._seed, RAIN_STREAM, key])
            self._cache[key] = draw_rain(rng, self._S, self._K, self._link)
        return self._cache[key]
