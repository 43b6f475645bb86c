"""
Weighted L2-Regularized Logistic Regression

The objective is

    L(w) = (1 / W) * sum_i weight_i * logloss(target_i, w . phi(x_i, a_i))
           + (l2 / 2) * ||w without bias||^2

with W the total row weight. Rows are aggregated into per-(context, action)
positive and negative weight before optimizing, so the cost of an iteration
depends on the number of distinct pairs, never on the number of rows, and a
duplicated row is exactly a row of doubled weight.
"""

import logging
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, log_expit

from src.env.space import Action, Context
from src.errors import PreconditionError
from src.glm.features import FeatureMap, pair_matrix
from src.glm.model import LinearModel, TrainMeta
from src.glm.optimize import TrainConfig, minimize

logger = logging.getLogger(__name__)

DEFAULT_L2_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


@dataclass(frozen=True)
class WeightedRows:
    """
    Columnar training rows (context index, action index, target, weight).

    Attributes:
        contexts (np.ndarray): Context indices
        actions (np.ndarray): Action indices
        targets (np.ndarray): 0/1 targets
        weights (np.ndarray): Non-negative row weights
    """

    contexts: np.ndarray
    actions: np.ndarray
    targets: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.targets)

    @classmethod
    def from_rows(cls, rows: Iterable[Tuple[Context, Action, int, float]]) -> "WeightedRows":
        """Build from (context, action, target, weight) tuples."""
        rows = list(rows)
        return cls(
            np.array([r[0].index for r in rows], dtype=np.int64),
            np.array([r[1].index for r in rows], dtype=np.int64),
            np.array([r[2] for r in rows], dtype=np.int8),
            np.array([r[3] for r in rows], dtype=np.float64),
        )

    @classmethod
    def concat(cls, parts: Sequence["WeightedRows"]) -> "WeightedRows":
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("contexts", "actions", "targets", "weights")))

    def subset(self, index: np.ndarray) -> "WeightedRows":
        return WeightedRows(self.contexts[index], self.actions[index], self.targets[index], self.weights[index])


@dataclass(frozen=True)
class _PairStats:
    """Per-pair positive and negative weight over the pairs that carry any."""

    design: np.ndarray
    positive: np.ndarray
    negative: np.ndarray
    total: float


def _aggregate(rows: WeightedRows, fm: FeatureMap) -> _PairStats:
    n_pairs = fm.n_contexts * fm.n_actions
    pair = rows.contexts.astype(np.int64) * fm.n_actions + rows.actions
    positive = np.bincount(pair, weights=rows.weights * (rows.targets == 1), minlength=n_pairs)
    negative = np.bincount(pair, weights=rows.weights * (rows.targets == 0), minlength=n_pairs)
    used = (positive + negative) > 0
    return _PairStats(pair_matrix(fm)[used], positive[used], negative[used], float(rows.weights.sum()))


def _penalty_mask(fm: FeatureMap) -> np.ndarray:
    mask = np.ones(fm.dimension)
    mask[fm.bias_index] = 0.0
    return mask


def _objective(stats: _PairStats, l2: float, penalty: np.ndarray):
    def fun(w: np.ndarray) -> Tuple[float, np.ndarray]:
        s = stats.design @ w
        loss = -(stats.positive @ log_expit(s) + stats.negative @ log_expit(-s)) / stats.total
        residual = expit(s) * (stats.positive + stats.negative) - stats.positive
        grad = stats.design.T @ residual / stats.total
        pw = penalty * w
        return loss + 0.5 * l2 * (pw @ pw), grad + l2 * pw

    return fun


def _hessian(stats: _PairStats, l2: float, penalty: np.ndarray):
    def hess(w: np.ndarray) -> np.ndarray:
        p = expit(stats.design @ w)
        curvature = p * (1.0 - p) * (stats.positive + stats.negative) / stats.total
        return (stats.design.T * curvature) @ stats.design + l2 * np.diag(penalty)

    return hess


def logistic_objective(weights: np.ndarray, rows: WeightedRows, fm: FeatureMap, l2: float) -> Tuple[float, np.ndarray]:
    """
    Regularized objective and its gradient at the given weights.

    Args:
        weights (np.ndarray): Point of evaluation
        rows (WeightedRows): Training rows
        fm (FeatureMap): Feature map
        l2 (float): L2 strength on non-bias weights

    Returns:
        Tuple[float, np.ndarray]: Objective value and gradient
    """
    return _objective(_aggregate(rows, fm), l2, _penalty_mask(fm))(np.asarray(weights, dtype=np.float64))


def logistic_hessian(weights: np.ndarray, rows: WeightedRows, fm: FeatureMap, l2: float) -> np.ndarray:
    """Hessian of logistic_objective."""
    return _hessian(_aggregate(rows, fm), l2, _penalty_mask(fm))(np.asarray(weights, dtype=np.float64))


def weighted_log_loss(m: LinearModel, rows: WeightedRows) -> float:
    """Weight-averaged log-loss of a model on rows, without the penalty."""
    if len(rows) == 0 or rows.weights.sum() <= 0:
        raise PreconditionError("Cannot compute a loss on rows with no weight")
    stats = _aggregate(rows, m.feature_map)
    s = stats.design @ m.weights
    return float(-(stats.positive @ log_expit(s) + stats.negative @ log_expit(-s)) / stats.total)


def train_logistic(
    rows: WeightedRows,
    fm: FeatureMap,
    cfg: Optional[TrainConfig] = None,
) -> LinearModel:
    """
    Fit a weighted L2-regularized logistic regression from zero weights.

    Args:
        rows (WeightedRows): Training rows
        fm (FeatureMap): Feature map
        cfg (TrainConfig, optional): Hyper-parameters, defaults to TrainConfig()

    Returns:
        LinearModel: Fitted model; train_meta.converged is False when the
            tolerance was not reached (for example separable data with l2 = 0)

    Raises:
        PreconditionError: If rows are empty, carry negative weight, or hold a
            single target value while l2 = 0
        NumericalError: If the objective becomes non-finite
    """
    cfg = cfg or TrainConfig()
    if len(rows) == 0:
        raise PreconditionError("train_logistic needs at least one row")
    if (rows.weights < 0).any() or rows.weights.sum() <= 0:
        raise PreconditionError("Row weights must be non-negative with a positive total")
    if cfg.l2 == 0 and len(np.unique(rows.targets)) < 2:
        raise PreconditionError("With l2 = 0 both target values are needed for a bounded optimum")

    stats = _aggregate(rows, fm)
    penalty = _penalty_mask(fm)
    result = minimize(
        _objective(stats, cfg.l2, penalty),
        np.zeros(fm.dimension),
        cfg,
        hessian=_hessian(stats, cfg.l2, penalty),
    )
    if not result.converged:
        logger.debug(
            f"Logistic fit did not converge: {result.iterations} iterations, grad norm {result.grad_norm:.3e}"
        )
    meta = TrainMeta(result.iterations, result.grad_norm, cfg.l2, result.converged, cfg.step_rule.value)
    return LinearModel(result.x, fm, meta)


def tune_l2(
    train: WeightedRows,
    valid: WeightedRows,
    fm: FeatureMap,
    cfg: TrainConfig,
    grid: Sequence[float] = DEFAULT_L2_GRID,
) -> float:
    """
    Pick the L2 strength with the lowest weighted validation log-loss.

    Ties go to the earlier grid value.

    Args:
        train (WeightedRows): Rows to fit on
        valid (WeightedRows): Held-out rows to score
        fm (FeatureMap): Feature map
        cfg (TrainConfig): Base hyper-parameters; only l2 is varied
        grid (Sequence[float]): Candidate strengths

    Returns:
        float: The selected l2
    """
    best_l2, best_loss = grid[0], np.inf
    for l2 in grid:
        model = train_logistic(train, fm, replace(cfg, l2=l2))
        loss = weighted_log_loss(model, valid)
        logger.debug(f"l2={l2:g}: validation log-loss {loss:.6f}")
        if loss < best_loss:
            best_l2, best_loss = l2, loss
    return best_l2
