"""Turn a validated config into a scene, a rain schedule and a frame run."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..ao import FrameResult, SlotScene, run_frame
from ..geometry import ConstellationSpec, align_epoch
from ..scene import RAIN_STREAM, RainSchedule, Scene, UeLayout, select_group
from .config import ScenarioConfig

# independent streams derived from the master seed
STREAM_RAIN = RAIN_STREAM
STREAM_UES = 2
STREAM_BASELINE = 3


def stream(seed: int, purpose: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng([seed, purpose, *extra])


@lru_cache(maxsize=32)
def _aligned_epoch(spec: ConstellationSpec, center: tuple, S: int, duration: float) -> float:
    return align_epoch(spec, np.array(center), S, duration)


def ue_layout(config: ScenarioConfig) -> UeLayout:
    K = config.K
    explicit = config["ue.positions"]
    if explicit:
        xy = np.array(explicit, dtype=float)
    else:
        rng = stream(config.seed, STREAM_UES)
        (x0, x1), (y0, y1) = config["region.x_range"], config["region.y_range"]
        xy = np.column_stack([rng.uniform(x0, x1, K), rng.uniform(y0, y1, K)])
    positions = np.column_stack([xy, np.zeros(K)])
    velocity = np.append(np.array(config["ue.velocity"], dtype=float), 0.0)
    return UeLayout(positions, np.tile(velocity, (K, 1)))


@dataclass(frozen=True)
class BuiltScenario:
    config: ScenarioConfig
    scene: Scene
    rain: RainSchedule

    def slot_scene(self, slot: int) -> SlotScene:
        return self.scene.slot_scene(slot, self.rain(slot))

    def run(self, mode: str | None = None) -> FrameResult:
        cfg = self.config
        return run_frame(
            self.slot_scene,
            cfg.n_slots,
            cfg.p_max,
            cfg.uav,
            mode or cfg.mode,
            cfg.ao_settings,
            rng=stream(cfg.seed, STREAM_BASELINE),
        )


def build_scenario(config: ScenarioConfig) -> BuiltScenario:
    spec = config.constellation
    center = config.region_center
    strategy = config["group.strategy"]
    # the epoch is aligned for the cooperation pattern; single-satellite rules reuse the S=1 epoch
    epoch = _aligned_epoch(spec, tuple(center), config.S, config["frame.duration"])
    group = select_group(spec, center, epoch, strategy, config.S)
    link = config.link
    scene = Scene(
        spec=spec,
        region_center=center,
        epoch=epoch,
        group=group,
        link=link,
        sat_array=config.sat_array,
        ris_array=config.ris_array,
        uav=config.uav,
        ues=ue_layout(config),
    )
    rain = RainSchedule(config.seed, len(group.members), config.K, link, config["run.rain_cadence"])
    return BuiltScenario(config, scene, rain)
