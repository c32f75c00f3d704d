"""Constellation geometry: Walker-Delta shells, propagation, visibility and link angles.

All positions are Earth-centred Cartesian vectors in metres. The Earth is a
sphere and does not rotate, so the Earth-fixed and inertial frames coincide
over the short frames simulated here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import EARTH_MU, EARTH_RADIUS, SPEED_OF_LIGHT


class NoVisibleSatellite(ValueError):
    """No satellite clears the minimum elevation."""


class PatternUnavailable(ValueError):
    """The requested cooperation pattern cannot be formed from visible satellites."""


class DegenerateDirection(ValueError):
    """Source and target are too close to define a direction."""


STRATEGIES = ("scenario_group", "max_elevation", "max_access_time")


@dataclass(frozen=True)
class ConstellationSpec:
    """Walker-Delta shell ``inclination: total/planes/phase_factor``."""

    orbital_altitude: float = 550e3
    num_planes: int = 36
    sats_per_plane: int = 22
    inclination: float = math.radians(53.0)
    phase_factor: int = 1
    min_elevation: float = math.radians(10.0)

    def __post_init__(self):
        if self.num_planes < 1 or self.sats_per_plane < 1:
            raise ValueError("constellation needs at least one plane and one satellite per plane")
        if not 0.0 < self.inclination <= math.pi / 2:
            raise ValueError("inclination must lie in (0, pi/2]")
        if not 0 <= self.phase_factor < self.num_planes:
            raise ValueError("phase_factor must lie in [0, num_planes)")
        if self.orbital_altitude <= 0:
            raise ValueError("orbital_altitude must be positive")

    @property
    def semi_major_axis(self) -> float:
        return EARTH_RADIUS + self.orbital_altitude

    @property
    def mean_motion(self) -> float:
        return math.sqrt(EARTH_MU / self.semi_major_axis**3)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.mean_motion

    @property
    def slot_spacing_time(self) -> float:
        """Time for a satellite to advance by one in-plane spacing."""
        return self.period / self.sats_per_plane

    @property
    def total(self) -> int:
        return self.num_planes * self.sats_per_plane


@dataclass(frozen=True)
class SatelliteState:
    position: np.ndarray
    velocity: np.ndarray
    plane_index: int
    slot_index: int


@dataclass(frozen=True)
class LinkAngles:
    """Azimuth in [-pi, pi) and elevation in [0, pi/2] of a direction in an array frame."""

    azimuth: float
    elevation: float

    @property
    def off_boresight(self) -> float:
        return math.pi / 2 - self.elevation


@dataclass
class GroupSelection:
    strategy: str
    members: list[int]
    elevations: list[float] = field(default_factory=list)
    pattern_matched: bool = True


@dataclass
class UeDemand:
    total_demand: float
    remaining_demand: float
    channel: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.remaining_demand <= self.total_demand:
            raise ValueError("remaining demand must lie in [0, total demand]")


# ---------------------------------------------------------------------------
# orbits


def _orbit_vectors(raan, arg_lat, inclination, radius, mean_motion):
    """Position and velocity of circular orbits; works elementwise on arrays."""
    cO, sO = np.cos(raan), np.sin(raan)
    cu, su = np.cos(arg_lat), np.sin(arg_lat)
    ci, si = math.cos(inclination), math.sin(inclination)
    pos = radius * np.stack([cO * cu - sO * su * ci, sO * cu + cO * su * ci, su * si], axis=-1)
    speed = radius * mean_motion
    vel = speed * np.stack([-cO * su - sO * cu * ci, -sO * su + cO * cu * ci, cu * si], axis=-1)
    return pos, vel


def walker_arrays(spec: ConstellationSpec, epoch: float = 0.0):
    """Vectorised constellation: positions (T, 3), velocities (T, 3), plane and slot indices."""
    planes = np.repeat(np.arange(spec.num_planes), spec.sats_per_plane)
    slots = np.tile(np.arange(spec.sats_per_plane), spec.num_planes)
    raan = 2.0 * np.pi * planes / spec.num_planes
    arg_lat = (
        2.0 * np.pi * slots / spec.sats_per_plane
        + 2.0 * np.pi * spec.phase_factor * planes / spec.total
        + spec.mean_motion * epoch
    )
    pos, vel = _orbit_vectors(raan, arg_lat, spec.inclination, spec.semi_major_axis, spec.mean_motion)
    return pos, vel, planes, slots


def build_walker_delta(spec: ConstellationSpec, epoch: float = 0.0) -> list[SatelliteState]:
    pos, vel, planes, slots = walker_arrays(spec, epoch)
    return [
        SatelliteState(pos[n], vel[n], int(planes[n]), int(slots[n])) for n in range(len(planes))
    ]


def propagate(state: SatelliteState, dt: float) -> SatelliteState:
    """Advance a circular orbit by ``dt`` seconds (rotation about the orbit normal)."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return state
    r = np.asarray(state.position, dtype=float)
    v = np.asarray(state.velocity, dtype=float)
    radius = np.linalg.norm(r)
    angle = math.sqrt(EARTH_MU / radius**3) * dt
    r_hat = r / radius
    v_hat = v / np.linalg.norm(v)
    c, s = math.cos(angle), math.sin(angle)
    new_r = radius * (c * r_hat + s * v_hat)
    new_v = np.linalg.norm(v) * (-s * r_hat + c * v_hat)
    return SatelliteState(new_r, new_v, state.plane_index, state.slot_index)


# ---------------------------------------------------------------------------
# local frames and angles


def project_to_surface(point: Sequence[float]) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    return EARTH_RADIUS * p / np.linalg.norm(p)


def enu_frame(center: Sequence[float]) -> np.ndarray:
    """Rows are the east, north and up unit vectors at ``center``."""
    c = np.asarray(center, dtype=float)
    up = c / np.linalg.norm(c)
    lon = math.atan2(up[1], up[0])
    lat = math.asin(np.clip(up[2], -1.0, 1.0))
    east = np.array([-math.sin(lon), math.cos(lon), 0.0])
    north = np.array([-math.sin(lat) * math.cos(lon), -math.sin(lat) * math.sin(lon), math.cos(lat)])
    return np.vstack([east, north, up])


def local_to_ecef(center: Sequence[float], local: np.ndarray) -> np.ndarray:
    """Map local east/north/up offsets (..., 3) at ``center`` to Earth-centred coordinates."""
    frame = enu_frame(center)
    return np.asarray(center, dtype=float) + np.asarray(local, dtype=float) @ frame


def satellite_frame(state: SatelliteState) -> np.ndarray:
    """Rows x', y', z' of a nadir-pointing array whose y' axis follows the velocity."""
    z = -np.asarray(state.position, dtype=float)
    z /= np.linalg.norm(z)
    y = np.asarray(state.velocity, dtype=float) - np.dot(state.velocity, z) * z
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    return np.vstack([x, y, z])


def link_angles(source: Sequence[float], target: Sequence[float], frame: np.ndarray) -> LinkAngles:
    """Angles of the source-to-target direction expressed in an array frame.

    With ``u`` the unit direction in frame coordinates, the azimuth is
    ``atan2(u_x, u_y)`` and the elevation is ``acos(hypot(u_x, u_y))``, so
    ``sin(az) * cos(el) = u_x`` and boresight maps to elevation ``pi/2``.
    """
    d = np.asarray(target, dtype=float) - np.asarray(source, dtype=float)
    dist = np.linalg.norm(d)
    if dist < 1.0:
        raise DegenerateDirection(f"source and target are {dist:.3g} m apart")
    u = np.asarray(frame) @ (d / dist)
    az = math.atan2(u[0], u[1])
    if az >= math.pi:
        az -= 2.0 * math.pi
    el = math.acos(min(1.0, math.hypot(u[0], u[1])))
    return LinkAngles(az, el)


def elevation_angle(observer: Sequence[float], target: np.ndarray) -> np.ndarray:
    """Elevation above the observer's local horizon for one or many targets."""
    obs = np.asarray(observer, dtype=float)
    up = obs / np.linalg.norm(obs)
    d = np.atleast_2d(target) - obs
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    el = np.arcsin(np.clip(d @ up, -1.0, 1.0))
    return el if np.ndim(target) > 1 else el[0]


def doppler_shift(sat: SatelliteState, angles: LinkAngles, f_c: float) -> float:
    if f_c <= 0:
        raise ValueError("carrier frequency must be positive")
    speed = float(np.linalg.norm(sat.velocity))
    return f_c * speed * math.sin(angles.azimuth) * math.cos(angles.elevation) / SPEED_OF_LIGHT


# ---------------------------------------------------------------------------
# group selection


def _adjacent(a: int, b: int, n: int) -> bool:
    return n > 1 and (a - b) % n in (1, n - 1)


def matches_pattern(members: Sequence[SatelliteState], spec: ConstellationSpec) -> bool:
    """Plane/slot adjacency test for the 2-, 3- and 4-satellite cooperation patterns."""
    n_planes, n_slots = spec.num_planes, spec.sats_per_plane

    def same_plane_pair(a, b):
        return a.plane_index == b.plane_index and _adjacent(a.slot_index, b.slot_index, n_slots)

    size = len(members)
    if size == 1:
        return True
    if size == 2:
        a, b = members
        return same_plane_pair(a, b) or _adjacent(a.plane_index, b.plane_index, n_planes)
    if size == 3:
        for i, j, k in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
            a, b, c = members[i], members[j], members[k]
            if same_plane_pair(a, b) and _adjacent(c.plane_index, a.plane_index, n_planes):
                return True
        return False
    if size == 4:
        for pair in ((0, 1), (0, 2), (0, 3)):
            rest = [i for i in range(4) if i not in pair]
            a, b = members[pair[0]], members[pair[1]]
            c, d = members[rest[0]], members[rest[1]]
            if (
                same_plane_pair(a, b)
                and same_plane_pair(c, d)
                and _adjacent(a.plane_index, c.plane_index, n_planes)
            ):
                return True
        return False
    return False


def access_time(state: SatelliteState, region_center, min_elevation: float, horizon: float = 600.0) -> float:
    """Seconds until the satellite drops below ``min_elevation`` (1 s steps, capped)."""
    t = 0.0
    current = state
    while t < horizon:
        nxt = propagate(current, 1.0)
        if elevation_angle(region_center, nxt.position) < min_elevation:
            return t
        current = nxt
        t += 1.0
    return horizon


def visible_group(
    states: Sequence[SatelliteState],
    region_center,
    min_elevation: float,
    strategy: str,
    S: int,
    spec: ConstellationSpec | None = None,
    eligible: Sequence[int] | None = None,
) -> GroupSelection:
    """Select the cooperating satellites for a region.

    ``scenario_group`` searches every visible S-subset that matches the
    cooperation pattern and keeps the one with the highest mean elevation.
    ``eligible`` optionally restricts candidates (indices into ``states``).
    Returned members are indices into ``states``.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    positions = np.array([s.position for s in states])
    elev = elevation_angle(region_center, positions)
    visible = [i for i in range(len(states)) if elev[i] >= min_elevation]
    if eligible is not None:
        allowed = set(eligible)
        visible = [i for i in visible if i in allowed]
    if not visible:
        raise NoVisibleSatellite("no satellite above the minimum elevation")
    if strategy == "max_elevation":
        best = max(visible, key=lambda i: (elev[i], -i))
        return GroupSelection(strategy, [best], [float(elev[best])])
    if strategy == "max_access_time":
        times = {i: access_time(states[i], region_center, min_elevation) for i in visible}
        best = max(visible, key=lambda i: (times[i], elev[i], -i))
        return GroupSelection(strategy, [best], [float(elev[best])])

    if spec is None:
        raise ValueError("scenario_group needs the constellation spec")
    if S > len(visible):
        raise PatternUnavailable(f"only {len(visible)} visible satellites for a group of {S}")
    best_group, best_score = None, -np.inf
    for combo in itertools.combinations(visible, S):
        if not matches_pattern([states[i] for i in combo], spec):
            continue
        score = float(np.mean(elev[list(combo)]))
        if score > best_score:
            best_group, best_score = combo, score
    if best_group is None:
        raise PatternUnavailable(f"no visible {S}-satellite group matches the cooperation pattern")
    members = sorted(best_group, key=lambda i: -elev[i])
    return GroupSelection(strategy, list(members), [float(elev[i]) for i in members])


def top_elevation_group(states, region_center, min_elevation, S) -> GroupSelection:
    """Fallback: the S highest visible satellites regardless of pattern."""
    positions = np.array([s.position for s in states])
    elev = elevation_angle(region_center, positions)
    visible = [i for i in np.argsort(-elev, kind="stable") if elev[i] >= min_elevation]
    if not visible:
        raise NoVisibleSatellite("no satellite above the minimum elevation")
    members = [int(i) for i in visible[:S]]
    return GroupSelection("scenario_group", members, [float(elev[i]) for i in members], False)


def align_epoch(
    spec: ConstellationSpec,
    region_center,
    S: int,
    frame_duration: float,
    step: float = 1.0,
) -> float:
    """Pick an epoch where a pattern-matching S-group stays visible for the whole frame.

    Scans one in-plane spacing period (the constellation maps onto itself
    after it). Candidates must be visible at both ends of the frame; the
    epoch maximising the group's lowest mid-frame elevation wins.
    """
    best_epoch, best_score = 0.0, -np.inf
    n_steps = max(1, int(math.floor(spec.slot_spacing_time / step)))
    for n in range(n_steps):
        epoch = n * step
        start = build_walker_delta(spec, epoch)
        end_pos, _, _, _ = walker_arrays(spec, epoch + frame_duration)
        mid_pos, _, _, _ = walker_arrays(spec, epoch + frame_duration / 2)
        el_end = elevation_angle(region_center, end_pos)
        eligible = [i for i in range(len(start)) if el_end[i] >= spec.min_elevation]
        try:
            if S == 1:
                group = visible_group(start, region_center, spec.min_elevation, "max_elevation", 1, spec, eligible)
            else:
                group = visible_group(start, region_center, spec.min_elevation, "scenario_group", S, spec, eligible)
        except (NoVisibleSatellite, PatternUnavailable):
            continue
        el_mid = elevation_angle(region_center, mid_pos[group.members])
        score = float(np.min(np.atleast_1d(el_mid)))
        if score > best_score + 1e-12:
            best_epoch, best_score = epoch, score
    if best_score == -np.inf:
        raise PatternUnavailable(f"no epoch yields a visible {S}-satellite group")
    return best_epoch


# ---------------------------------------------------------------------------
# scheduling


def schedule_users(demands: Sequence[UeDemand], K_max: int) -> list[int]:
    """Demand-weighted greedy scheduling with a channel-correlation penalty.

    Returns an empty list when no UE has outstanding demand.
    """
    if K_max < 1:
        raise ValueError("K_max must be at least 1")
    alpha = np.array([d.remaining_demand / d.total_demand if d.total_demand > 0 else 0.0 for d in demands])
    if len(demands) == 0 or np.all(alpha == 0):
        return []
    channels = [np.asarray(d.channel, dtype=complex).ravel() for d in demands]
    norms = np.array([np.linalg.norm(f) for f in channels])
    first = int(np.argmax(alpha * norms))
    chosen = [first]
    remaining = [i for i in range(len(demands)) if i != first]
    while remaining and len(chosen) < K_max:
        scores = []
        for m in remaining:
            corr = sum(
                abs(np.vdot(channels[m], channels[j])) / (norms[j] * norms[m]) for j in chosen
            )
            scores.append(alpha[m] * (1.0 - corr))
        pick = remaining[int(np.argmax(scores))]
        chosen.append(pick)
        remaining.remove(pick)
    return chosen
