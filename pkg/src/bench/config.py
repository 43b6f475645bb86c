"""
Experiment Configuration

An ExperimentConfig is loaded from a JSON document whose keys mirror the
field names below. Process-level settings (log level, default parallelism,
output directory) come from environment variables, optionally set in a
.env file.
"""

import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv

from src.env.environment import EnvConfig
from src.errors import ConfigurationError
from src.glm.features import FeatureMap
from src.glm.logistic import DEFAULT_L2_GRID
from src.glm.optimize import StepRule, TrainConfig
from src.learners.ls_ips import DEFAULT_LAMBDA_GRID
from src.learners.spec import LearnerKind, LearnerSpec

load_dotenv()

logger = logging.getLogger(__name__)

FULL_SCALE_ENVIRONMENTS = 100
FULL_SCALE_SIZES = (10_000, 100_000, 500_000)

LEARNER_LABELS = {
    LearnerKind.DM: "DM",
    LearnerKind.CSI_SAMPLING: "CSI-sampling",
    LearnerKind.CSI_EXPECT: "CSI-expect",
    LearnerKind.LS_IPS: "LS-IPS",
}


def env_log_level() -> str:
    return os.getenv("BENCH_LOG_LEVEL", "INFO").upper()


def env_parallelism() -> Optional[int]:
    """BENCH_PARALLELISM if set, else None."""
    value = os.getenv("BENCH_PARALLELISM")
    if value is None:
        return None
    try:
        return int(value)
    except ValueError as e:
        raise ConfigurationError(f"BENCH_PARALLELISM must be an integer, got {value!r}") from e


def env_output_dir() -> str:
    return os.getenv("BENCH_OUTPUT_DIR", "./results")


class FirstStage(Enum):
    DM = "dm"
    CSI_EXPECT = "csi_expect"
    ALTERNATE = "alternate"


class Scenario(Enum):
    FULL = "full"
    FEATURE_SUBSET = "feature_subset"


class OutputFormat(Enum):
    CSV = "csv"
    MARKDOWN = "markdown"


@dataclass(frozen=True)
class LearnerEntry:
    """
    One learner of the comparison.

    Attributes:
        kind (LearnerKind): Learning method
        l2 (float, optional): Fixed L2; None means tune over the config grid
        ls_lambda (float, optional): Fixed LS lambda; None means tune
    """

    kind: LearnerKind
    l2: Optional[float] = None
    ls_lambda: Optional[float] = None

    @classmethod
    def from_dict(cls, data: Union[str, Dict[str, Any]]) -> "LearnerEntry":
        if isinstance(data, str):
            data = {"kind": data}
        unknown = set(data) - {"kind", "l2", "ls_lambda"}
        if unknown:
            raise ConfigurationError(f"Unknown learner keys: {sorted(unknown)}")
        try:
            kind = LearnerKind(data["kind"])
        except (KeyError, ValueError) as e:
            raise ConfigurationError(f"Invalid learner kind in {data}") from e
        return cls(kind, data.get("l2"), data.get("ls_lambda"))

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind.value}
        if self.l2 is not None:
            data["l2"] = self.l2
        if self.ls_lambda is not None:
            data["ls_lambda"] = self.ls_lambda
        return data


DEFAULT_LEARNERS = tuple(LearnerEntry(kind) for kind in LearnerKind)
DEFAULT_SUBSET_MASK = FeatureMap.hiding_context_bits((0, 1, 2)).mask


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything an experiment depends on; results are a pure function of it.

    Attributes:
        master_seed (int): Root of every derived seed
        n_environments (int): Environments per sample size, >= 1
        sample_sizes (Tuple[int, ...]): Dataset sizes, each >= 100
        epsilon (float): Exploration of the second-stage logging policy, in (0, 1]
        first_stage_learner (FirstStage): Model behind the logging policy
        scenario (Scenario): Learner comparison or feature-subset study
        subset_mask (Tuple[bool, ...]): Visible bits for the subset learners
        learners (Tuple[LearnerEntry, ...]): Learners of the full scenario
        output (str): Result file path
        output_format (OutputFormat): csv or markdown
        env (EnvConfig): Environment generator settings
        l2_grid (Tuple[float, ...]): L2 candidates for held-out tuning
        lambda_grid (Tuple[float, ...]): LS-IPS lambda candidates
        holdout_fraction (float): Share of training rows used for tuning
        step_rule (StepRule): GLM optimizer step rule
        ls_step_rule (StepRule): LS-IPS optimizer step rule
        max_iters (int): Optimizer iteration budget
        tol (float): Optimizer gradient tolerance
        parallelism (int): Worker processes
    """

    master_seed: int = 0
    n_environments: int = 20
    sample_sizes: Tuple[int, ...] = (10_000, 100_000)
    epsilon: float = 0.05
    first_stage_learner: FirstStage = FirstStage.ALTERNATE
    scenario: Scenario = Scenario.FULL
    subset_mask: Tuple[bool, ...] = DEFAULT_SUBSET_MASK
    learners: Tuple[LearnerEntry, ...] = DEFAULT_LEARNERS
    output: str = "results.csv"
    output_format: OutputFormat = OutputFormat.CSV
    env: EnvConfig = field(default_factory=EnvConfig)
    l2_grid: Tuple[float, ...] = DEFAULT_L2_GRID
    lambda_grid: Tuple[float, ...] = DEFAULT_LAMBDA_GRID
    holdout_fraction: float = 0.2
    step_rule: StepRule = StepRule.NEWTON
    ls_step_rule: StepRule = StepRule.LBFGS
    max_iters: int = 5000
    tol: float = 1e-8
    parallelism: int = 1

    def validate(self) -> None:
        """
        Check the configuration.

        Raises:
            ConfigurationError: On the first invalid field
        """
        if self.n_environments < 1:
            raise ConfigurationError(f"n_environments must be >= 1, got {self.n_environments}")
        if not self.sample_sizes or any(n < 100 for n in self.sample_sizes):
            raise ConfigurationError(f"sample_sizes must be >= 100, got {self.sample_sizes}")
        if not 0 < self.epsilon <= 1:
            raise ConfigurationError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if not 0 < self.holdout_fraction < 1:
            raise ConfigurationError(f"holdout_fraction must be in (0, 1), got {self.holdout_fraction}")
        if not self.learners:
            raise ConfigurationError("At least one learner is required")
        if self.parallelism < 1:
            raise ConfigurationError(f"parallelism must be >= 1, got {self.parallelism}")
        if not self.l2_grid or not self.lambda_grid:
            raise ConfigurationError("l2_grid and lambda_grid must not be empty")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigurationError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        self.env.validate()
        n_bits = self.env.n_context_bits + self.env.n_action_bits
        if len(self.subset_mask) != n_bits:
            raise ConfigurationError(f"subset_mask needs {n_bits} entries, got {len(self.subset_mask)}")
        self.glm_train_config()
        self.ls_train_config()

    def glm_train_config(self) -> TrainConfig:
        return TrainConfig(max_iters=self.max_iters, tol=self.tol, step_rule=self.step_rule)

    def ls_train_config(self) -> TrainConfig:
        return TrainConfig(max_iters=self.max_iters, tol=self.tol, step_rule=self.ls_step_rule)

    def full_map(self) -> FeatureMap:
        return FeatureMap.full(self.env.n_context_bits, self.env.n_action_bits)

    def subset_map(self) -> FeatureMap:
        return FeatureMap(self.subset_mask, self.env.n_context_bits)

    def learner_spec(self, entry: LearnerEntry, feature_map: Optional[FeatureMap] = None) -> LearnerSpec:
        """Turn a learner entry into a trainable spec."""
        fm = feature_map or self.full_map()
        if entry.kind is LearnerKind.LS_IPS:
            return LearnerSpec(
                entry.kind, fm, self.ls_train_config(),
                ls_lambda=entry.ls_lambda,
                lambda_grid=() if entry.ls_lambda is not None else self.lambda_grid,
            )
        cfg = self.glm_train_config()
        if entry.l2 is not None:
            return LearnerSpec(entry.kind, fm, replace(cfg, l2=entry.l2))
        return LearnerSpec(entry.kind, fm, cfg, l2_grid=self.l2_grid)

    def first_stage_kind(self, env_index: int) -> LearnerKind:
        """Learner behind the logging policy of one environment."""
        if self.first_stage_learner is FirstStage.DM:
            return LearnerKind.DM
        if self.first_stage_learner is FirstStage.CSI_EXPECT:
            return LearnerKind.CSI_EXPECT
        return LearnerKind.DM if env_index % 2 == 0 else LearnerKind.CSI_EXPECT

    def with_full_scale(self) -> "ExperimentConfig":
        return replace(self, n_environments=FULL_SCALE_ENVIRONMENTS, sample_sizes=FULL_SCALE_SIZES)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Build and validate a config from a JSON-style dict.

        Raises:
            ConfigurationError: On unknown keys or invalid values
        """
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown config keys: {sorted(unknown)}")
        kwargs: Dict[str, Any] = dict(data)
        try:
            for key, enum in (
                ("first_stage_learner", FirstStage),
                ("scenario", Scenario),
                ("output_format", OutputFormat),
                ("step_rule", StepRule),
                ("ls_step_rule", StepRule),
            ):
                if key in kwargs:
                    kwargs[key] = enum(kwargs[key])
        except ValueError as e:
            raise ConfigurationError(str(e)) from e
        for key in ("sample_sizes", "l2_grid", "lambda_grid"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if "subset_mask" in kwargs:
            kwargs["subset_mask"] = tuple(bool(m) for m in kwargs["subset_mask"])
        if "learners" in kwargs:
            kwargs["learners"] = tuple(LearnerEntry.from_dict(e) for e in kwargs["learners"])
        if "env" in kwargs:
            kwargs["env"] = EnvConfig.from_dict(kwargs["env"])
        try:
            config = cls(**kwargs)
        except TypeError as e:
            raise ConfigurationError(str(e)) from e
        config.validate()
        return config

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready dict; from_dict(to_dict()) gives an equal config."""
        return {
            "master_seed": self.master_seed,
            "n_environments": self.n_environments,
            "sample_sizes": list(self.sample_sizes),
            "epsilon": self.epsilon,
            "first_stage_learner": self.first_stage_learner.value,
            "scenario": self.scenario.value,
            "subset_mask": list(self.subset_mask),
            "learners": [e.to_dict() for e in self.learners],
            "output": self.output,
            "output_format": self.output_format.value,
            "env": self.env.to_dict(),
            "l2_grid": list(self.l2_grid),
            "lambda_grid": list(self.lambda_grid),
            "holdout_fraction": self.holdout_fraction,
            "step_rule": self.step_rule.value,
            "ls_step_rule": self.ls_step_rule.value,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "parallelism": self.parallelism,
        }


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read an experiment config file.

    Args:
        path (str | Path): JSON document

    Returns:
        ExperimentConfig: Validated configuration

    Raises:
        ConfigurationError: If the file is missing, unreadable or invalid
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must hold a JSON object")
    config = ExperimentConfig.from_dict(data)
    logger.info(f"Loaded config from {path}: {config.n_environments} environments, sizes {list(config.sample_sizes)}")
    return config


def labelled_specs(config: ExperimentConfig) -> List[Tuple[str, LearnerSpec]]:
    """(label, spec) for every learner the config's scenario trains."""
    if config.scenario is Scenario.FEATURE_SUBSET:
        full, subset = config.full_map(), config.subset_map()
        dm = LearnerEntry(LearnerKind.DM)
        csi = LearnerEntry(LearnerKind.CSI_EXPECT)
        return [
            ("DM-full", config.learner_spec(dm, full)),
            ("DM-subset", config.learner_spec(dm, subset)),
            ("CSI-subset", config.learner_spec(csi, subset)),
            ("CSI-full", config.learner_spec(csi, full)),
        ]
    return [(LEARNER_LABELS[e.kind], config.learner_spec(e)) for e in config.learners]
