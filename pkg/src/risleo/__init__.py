"""Cooperative multi-satellite downlink with a UAV-mounted RIS.

Statistical-CSI rate evaluation and alternating optimisation of satellite
beamforming, RIS phase shifts and UAV trajectory.
"""

from .ao import MODES, optimize_slot, run_frame
from .channel import StatisticalCsi, build_statistical_csi
from .rate import approx_min_rate, mc_ergodic_rates, rate_report

__all__ = [
    "MODES",
    "StatisticalCsi",
    "approx_min_rate",
    "build_statistical_csi",
    "mc_ergodic_rates",
    "optimize_slot",
    "rate_report",
    "run_frame",
]
