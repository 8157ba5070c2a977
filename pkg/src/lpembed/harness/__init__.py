"""Configuration, experiment runners, reporting and the command line."""

from .config import ExperimentConfig, emit_config, eq1_m, load_config, parse_config
from .experiments import (
    ExperimentResult,
    run_certify,
    run_distortion_study,
    run_experiment,
    run_gelfand_study,
    run_phase_transition,
    run_stable_validation,
)
from .report import format_csv, write_result

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "emit_config",
    "eq1_m",
    "format_csv",
    "load_config",
    "parse_config",
    "run_certify",
    "run_distortion_study",
    "run_experiment",
    "run_gelfand_study",
    "run_phase_transition",
    "run_stable_validation",
    "write_result",
]
