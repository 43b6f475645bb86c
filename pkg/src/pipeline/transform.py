"""
Counterfactual Sample Identification Transform

Keeps the positive samples of a log and pairs each with counterfactual
actions drawn from the logging policy:

    (x, a, z=1, w=1)  for the logged action
    (x, a', z=0, w)   for counterfactual actions

The sampling variant draws one a' ~ pi0(.|x) per positive (w = 1). The
expectation variant emits every a' with pi0(a'|x) > 0 and w = pi0(a'|x),
which keeps the expected loss of the sampling variant and removes its
sampling noise.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional

import numpy as np

from src.env.environment import draw_actions
from src.env.space import Action, Context
from src.glm.logistic import WeightedRows, weighted_log_loss
from src.glm.model import LinearModel
from src.pipeline.collect import LoggedDataset
from src.policy.policies import Policy

logger = logging.getLogger(__name__)


class CsiVariant(Enum):
    SAMPLING = "sampling"
    EXPECT = "expect"


@dataclass(frozen=True)
class CsiExample:
    """
    One CSI training row.

    Attributes:
        x (Context): Context of the source positive
        b (Action): Action shown to the classifier (logged or counterfactual)
        z (int): 1 for the logged action, 0 for a counterfactual one
        weight (float): Row weight, > 0
    """

    x: Context
    b: Action
    z: int
    weight: float


class CsiDataset(Sequence):
    """
    Column-wise CSI rows; a read-only sequence of CsiExample.

    Rows come in one block per source positive: its z=1 row first, then its
    z=0 rows. propensities holds pi0(b|x) for the action b shown on each row
    (NaN when unknown).
    """

    def __init__(
        self,
        contexts: np.ndarray,
        actions: np.ndarray,
        targets: np.ndarray,
        weights: np.ndarray,
        n_context_bits: int,
        n_action_bits: int,
        propensities: Optional[np.ndarray] = None,
    ):
        self.contexts = np.asarray(contexts, dtype=np.int64)
        self.actions = np.asarray(actions, dtype=np.int64)
        self.targets = np.asarray(targets, dtype=np.int8)
        self.weights = np.asarray(weights, dtype=np.float64)
        if propensities is None:
            self.propensities = np.full(len(self.targets), np.nan)
        else:
            self.propensities = np.asarray(propensities, dtype=np.float64)
        self.n_context_bits = n_context_bits
        self.n_action_bits = n_action_bits

    def __len__(self) -> int:
        return len(self.targets)

    def __getitem__(self, i: int) -> CsiExample:
        return CsiExample(
            Context.from_index(int(self.contexts[i]), self.n_context_bits),
            Action.from_index(int(self.actions[i]), self.n_action_bits),
            int(self.targets[i]),
            float(self.weights[i]),
        )

    def __iter__(self) -> Iterator[CsiExample]:
        return (self[i] for i in range(len(self)))

    def to_rows(self) -> WeightedRows:
        return WeightedRows(self.contexts, self.actions, self.targets, self.weights)

    def __repr__(self) -> str:
        return f"CsiDataset(rows={len(self)}, positives={int((self.targets == 1).sum())})"


def _empty(data: LoggedDataset) -> CsiDataset:
    return CsiDataset(
        np.empty(0), np.empty(0), np.empty(0), np.empty(0), data.n_context_bits, data.n_action_bits
    )


def csi_transform_sampling(data: LoggedDataset, pi0: Policy, rng: np.random.Generator) -> CsiDataset:
    """
    Sampling variant: one counterfactual action per positive.

    Args:
        data (LoggedDataset): Log collected under pi0
        pi0 (Policy): The logging policy
        rng (np.random.Generator): Fresh stream used only for counterfactual draws

    Returns:
        CsiDataset: 2 rows per positive, all weights 1; negatives are dropped
    """
    positives = data.positives
    if len(positives) == 0:
        return _empty(data)
    x = data.contexts[positives]
    table = pi0.probs_table()
    counterfactual = draw_actions(table, x, rng.random(len(positives)))

    contexts = np.repeat(x, 2)
    actions = np.column_stack([data.actions[positives], counterfactual]).ravel()
    targets = np.tile([1, 0], len(positives))
    propensities = np.column_stack([data.propensities[positives], table[x, counterfactual]]).ravel()
    out = CsiDataset(
        contexts, actions, targets, np.ones(2 * len(positives)), data.n_context_bits, data.n_action_bits, propensities
    )
    logger.debug(f"Sampling transform: {data!r} -> {out!r}")
    return out


def csi_transform_expect(data: LoggedDataset, pi0: Policy) -> CsiDataset:
    """
    Expectation variant: every supported counterfactual action, weighted.

    Args:
        data (LoggedDataset): Log collected under pi0
        pi0 (Policy): The logging policy

    Returns:
        CsiDataset: Per positive, one z=1 row of weight 1 plus one z=0 row of
            weight pi0(a'|x) for each a' with pi0(a'|x) > 0
    """
    positives = data.positives
    if len(positives) == 0:
        return _empty(data)
    table = pi0.probs_table()
    k, n_actions = len(positives), table.shape[1]
    x = data.contexts[positives]

    actions = np.empty((k, 1 + n_actions), dtype=np.int64)
    actions[:, 0] = data.actions[positives]
    actions[:, 1:] = np.arange(n_actions)
    weights = np.empty((k, 1 + n_actions))
    weights[:, 0] = 1.0
    weights[:, 1:] = table[x]
    propensities = weights.copy()
    propensities[:, 0] = data.propensities[positives]
    targets = np.zeros((k, 1 + n_actions), dtype=np.int8)
    targets[:, 0] = 1
    contexts = np.repeat(x[:, None], 1 + n_actions, axis=1)

    keep = (weights > 0).ravel()
    out = CsiDataset(
        contexts.ravel()[keep],
        actions.ravel()[keep],
        targets.ravel()[keep],
        weights.ravel()[keep],
        data.n_context_bits,
        data.n_action_bits,
        propensities.ravel()[keep],
    )
    logger.debug(f"Expectation transform: {data!r} -> {out!r}")
    return out


def csi_transform(data: LoggedDataset, pi0: Policy, variant: CsiVariant, rng: np.random.Generator) -> CsiDataset:
    """Dispatch to the sampling or expectation variant."""
    if variant is CsiVariant.SAMPLING:
        return csi_transform_sampling(data, pi0, rng)
    return csi_transform_expect(data, pi0)


def csi_log_loss(model: LinearModel, csi: CsiDataset) -> float:
    """Weight-averaged log-loss of a classifier on CSI rows."""
    return weighted_log_loss(model, csi.to_rows())
