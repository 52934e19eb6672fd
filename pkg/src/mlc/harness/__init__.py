"""Experiment runner, baselines, sweeps and report export."""

from .config import ConfigError, ExperimentConfig, load_config
from .export import export_report, export_sweep
from .runner import RunReport, accuracy_auc, correction_analysis, run_experiment, run_repeats, run_sweep
from ..metrics import evaluate

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunReport",
    "accuracy_auc",
    "correction_analysis",
    "evaluate",
    "export_report",
    "export_sweep",
    "load_config",
    "run_experiment",
    "run_repeats",
    "run_sweep",
]
