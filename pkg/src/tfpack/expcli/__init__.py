"""Experiment orchestration: configs, the operating-point runner and result files."""
from .config import ConfigError, ExperimentConfig, load_config, load_preset, preset_names, with_values
from .results import ResultRow, emit_results
from .runner import Scenario, evaluate_point, run_experiment, scenario_from_config

__all__ = ["ConfigError", "ExperimentConfig", "ResultRow", "Scenario", "emit_results",
           "evaluate_point", "load_config", "load_preset", "preset_names", "run_experiment",
           "scenario_from_config", "with_values"]
