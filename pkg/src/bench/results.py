"""Records produced by experiment cells."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from src.bench.config import ExperimentConfig

ORACLE_LABEL = "Oracle"


@dataclass(frozen=True)
class CellRecord:
    """
    Result of one learner in one cell.

    Attributes:
        env_seed (int): Seed of the environment
        n_samples (int): Size of each logged dataset
        learner (str): Learner label
        normalized_reward (float): Normalized value of the greedy policy
        l2 (float, optional): L2 used (GLM learners)
        extra_hyper (str): Other hyper-parameters, key=value pairs joined by ';'
        converged (bool): Whether the final fit converged
        first_stage (str): Learner behind the logging policy
        env_index (int): Environment number in the experiment
    """

    env_seed: int
    n_samples: int
    learner: str
    normalized_reward: float
    l2: Optional[float]
    extra_hyper: str
    converged: bool
    first_stage: str
    env_index: int = 0

    def sort_key(self) -> Tuple[int, int, str]:
        return self.env_seed, self.n_samples, self.learner


@dataclass(frozen=True)
class CellFailure:
    """A cell that raised instead of producing records."""

    env_index: int
    env_seed: int
    n_samples: int
    error: str


@dataclass
class ExperimentResult:
    """
    All records of an experiment plus the cells that failed.

    Records are kept in canonical order (env_seed, n_samples, learner).
    """

    config: ExperimentConfig
    records: List[CellRecord] = field(default_factory=list)
    failures: List[CellFailure] = field(default_factory=list)

    def __post_init__(self):
        self.records.sort(key=CellRecord.sort_key)
        self.failures.sort(key=lambda f: (f.env_seed, f.n_samples))
