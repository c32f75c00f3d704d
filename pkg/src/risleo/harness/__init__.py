"""Scenario configs, experiment presets, CSV/manifest output and the CLI."""

from .config import ParseError, ScenarioConfig, ValidationError, load_scenario, save_scenario
from .experiments import EXPERIMENTS, ExperimentReport, run_experiment
from .output import emit_csv, write_report

__all__ = [
    "EXPERIMENTS",
    "ExperimentReport",
    "ParseError",
    "ScenarioConfig",
    "ValidationError",
    "emit_csv",
    "load_scenario",
    "run_experiment",
    "save_scenario",
    "write_report",
]
