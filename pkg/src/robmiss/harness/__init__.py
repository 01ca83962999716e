"""Simulation-study harness: roster, runner, calibration, diagnostics and CLI."""

from .calibrate import CalibrationResult, calibrate_tuning
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .diagnostics import emit_weight_diagnostics
from .roster import DEFAULT_ROSTER, EstimatorRosterEntry, EstimatorSpec, build_roster, parse_label
from .runner import SummaryRow, run_experiment, run_replicates, summarize

__all__ = [
    "CalibrationResult", "calibrate_tuning", "ConfigError", "ExperimentConfig", "load_config",
    "parse_config", "emit_weight_diagnostics", "DEFAULT_ROSTER", "EstimatorRosterEntry",
    "EstimatorSpec", "build_roster", "parse_label", "SummaryRow", "run_experiment",
    "run_replicates", "summarize",
]
