"""Experiment harness."""

from .config import ExperimentConfig, load_config
from .coordinator import ExperimentCoordinator
from .results import CellRecord, ExperimentResult
from .runner import run_experiment, run_feature_subset, run_single
from .workspace import ResultWorkspace

__all__ = [
    "CellRecord",
    "ExperimentConfig",
    "ExperimentCoordinator",
    "ExperimentResult",
    "ResultWorkspace",
    "load_config",
    "run_experiment",
    "run_feature_subset",
    "run_single",
]
