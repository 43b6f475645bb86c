"""
Logged Bandit Data

Collects i.i.d. interactions under a logging policy. Datasets are stored
column-wise and behave as read-only sequences of LoggedSample.
"""

import logging
from dataclasses import dataclass
from collections.abc import Sequence
from typing import Iterator, Tuple, Union, overload

import numpy as np

from src.env.environment import Environment, context_probs, draw_actions, reward_table
from src.env.space import Action, Context
from src.errors import CoverageError, PreconditionError
from src.glm.logistic import WeightedRows
from src.policy.policies import Policy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoggedSample:
    """
    One logged interaction.

    Attributes:
        x (Context): Observed context
        a (Action): Action played
        propensity (float): Probability the logging policy gave to a, > 0
        y (int): Binary reward
    """

    x: Context
    a: Action
    propensity: float
    y: int

    def __post_init__(self):
        if not self.propensity > 0:
            raise CoverageError(f"Propensity must be positive, got {self.propensity}")
        if self.y not in (0, 1):
            raise ValueError(f"Reward must be 0 or 1, got {self.y}")


class LoggedDataset(Sequence):
    """
    Column-wise logged data.

    Args:
        contexts (np.ndarray): Context indices
        actions (np.ndarray): Action indices
        propensities (np.ndarray): Logging probabilities of the played actions
        rewards (np.ndarray): 0/1 rewards
        n_context_bits (int): Bits per context
        n_action_bits (int): Bits per action
    """

    def __init__(
        self,
        contexts: np.ndarray,
        actions: np.ndarray,
        propensities: np.ndarray,
        rewards: np.ndarray,
        n_context_bits: int,
        n_action_bits: int,
    ):
        self.contexts = np.asarray(contexts, dtype=np.int64)
        self.actions = np.asarray(actions, dtype=np.int64)
        self.propensities = np.asarray(propensities, dtype=np.float64)
        rewards = np.asarray(rewards)
        if not np.isin(rewards, (0, 1)).all():
            raise ValueError("Logged rewards must be 0 or 1")
        self.rewards = rewards.astype(np.int8)
        self.n_context_bits = n_context_bits
        self.n_action_bits = n_action_bits
        if not (len(self.contexts) == len(self.actions) == len(self.propensities) == len(self.rewards)):
            raise ValueError("Logged columns must have equal length")
        if (self.propensities <= 0).any():
            raise CoverageError("Logged data contains a zero propensity")

    @classmethod
    def from_samples(cls, samples: Sequence[LoggedSample]) -> "LoggedDataset":
        if not samples:
            raise PreconditionError("Cannot infer spaces from an empty sample list")
        return cls(
            np.array([s.x.index for s in samples]),
            np.array([s.a.index for s in samples]),
            np.array([s.propensity for s in samples]),
            np.array([s.y for s in samples]),
            len(samples[0].x.bits),
            len(samples[0].a.bits),
        )

    def __len__(self) -> int:
        return len(self.rewards)

    @overload
    def __getitem__(self, i: int) -> LoggedSample: ...

    @overload
    def __getitem__(self, i: slice) -> "LoggedDataset": ...

    def __getitem__(self, i: Union[int, slice]):
        if isinstance(i, slice):
            return self.subset(np.arange(len(self))[i])
        return LoggedSample(
            Context.from_index(int(self.contexts[i]), self.n_context_bits),
            Action.from_index(int(self.actions[i]), self.n_action_bits),
            float(self.propensities[i]),
            int(self.rewards[i]),
        )

    def __iter__(self) -> Iterator[LoggedSample]:
        return (self[i] for i in range(len(self)))

    def subset(self, index: np.ndarray) -> "LoggedDataset":
        return LoggedDataset(
            self.contexts[index],
            self.actions[index],
            self.propensities[index],
            self.rewards[index],
            self.n_context_bits,
            self.n_action_bits,
        )

    @property
    def positives(self) -> np.ndarray:
        """Indices of rows with reward 1."""
        return np.flatnonzero(self.rewards == 1)

    def to_rows(self) -> WeightedRows:
        """Reward-model rows: target y, weight 1."""
        return WeightedRows(self.contexts, self.actions, self.rewards, np.ones(len(self)))

    def __repr__(self) -> str:
        return f"LoggedDataset(n={len(self)}, positives={len(self.positives)})"


def collect_dataset(env: Environment, pi0: Policy, n: int, rng: np.random.Generator) -> LoggedDataset:
    """
    Log n interactions of pi0 with the environment.

    Args:
        env (Environment): Environment to interact with
        pi0 (Policy): Logging policy
        n (int): Number of interactions, >= 1
        rng (np.random.Generator): Caller-owned seeded stream

    Returns:
        LoggedDataset: Samples with exact propensities and Bernoulli rewards

    Raises:
        PreconditionError: If n < 1
        CoverageError: If a sampled action has zero propensity
    """
    if n < 1:
        raise PreconditionError(f"collect_dataset needs n >= 1, got {n}")
    table = pi0.probs_table()
    contexts = rng.choice(env.n_contexts, size=n, p=context_probs(env))
    actions = draw_actions(table, contexts, rng.random(n))
    propensities = table[contexts, actions]
    if (propensities <= 0).any():
        raise CoverageError(f"Logging policy {pi0!r} sampled an action with zero propensity")
    rewards = (rng.random(n) < reward_table(env)[contexts, actions]).astype(np.int8)
    data = LoggedDataset(
        contexts, actions, propensities, rewards, env.config.n_context_bits, env.config.n_action_bits
    )
    logger.debug(f"Collected {data} under {pi0!r}")
    return data


def split_holdout(data: LoggedDataset, fraction: float, rng: np.random.Generator) -> Tuple[LoggedDataset, LoggedDataset]:
    """
    Randomly split data into (train, holdout).

    Args:
        data (LoggedDataset): Data to split
        fraction (float): Share of rows held out, in (0, 1)
        rng (np.random.Generator): Caller-owned seeded stream

    Returns:
        Tuple[LoggedDataset, LoggedDataset]: Train part and held-out part
    """
    if not 0 < fraction < 1:
        raise PreconditionError(f"Holdout fraction must be in (0, 1), got {fraction}")
    order = rng.permutation(len(data))
    n_hold = max(1, int(round(fraction * len(data))))
    return data.subset(np.sort(order[n_hold:])), data.subset(np.sort(order[:n_hold]))
