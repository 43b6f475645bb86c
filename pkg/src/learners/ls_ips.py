"""
Logarithmic-Smoothing IPS Policy Learning

The policy is a softmax over linear scores, pi_theta(a|x) proportional to
exp(theta . phi(x, a)). It maximizes

    J(theta) = (1/n) sum_i (1/lambda) * log(1 + lambda * w_i * y_i),
    w_i = pi_theta(a_i|x_i) / pi0(a_i|x_i)

Negatives contribute exactly zero, so only positives enter the sum (n still
counts every sample). Because log(1 + lambda * w) / lambda <= w, J is a
pessimistic lower bound of the plain IPS estimate.
"""

import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np
from scipy.special import log_softmax

from src.errors import CoverageError, NumericalError, PreconditionError
from src.glm.features import FeatureMap, pair_matrix
from src.glm.model import LinearModel, TrainMeta
from src.glm.optimize import minimize
from src.learners.spec import LearnerKind, LearnerSpec
from src.pipeline.collect import LoggedDataset
from src.policy.policies import Link, Policy, SoftmaxPolicy

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (0.001, 0.01, 0.1, 1.0)


def ls_term(w, lam: float):
    """Smoothed importance-weighted reward log(1 + lam * w) / lam."""
    return np.log1p(lam * np.asarray(w, dtype=np.float64)) / lam


@dataclass(frozen=True)
class _PositiveStats:
    """Positives grouped by (context, action, propensity)."""

    contexts: np.ndarray
    actions: np.ndarray
    inv_propensity: np.ndarray
    counts: np.ndarray
    n_total: int


def _positive_stats(data: LoggedDataset) -> _PositiveStats:
    if len(data) == 0:
        raise PreconditionError("LS-IPS needs at least one logged sample")
    if (data.propensities <= 0).any():
        raise CoverageError("LS-IPS needs strictly positive propensities")
    pos = data.positives
    keys = np.column_stack([data.contexts[pos], data.actions[pos], data.propensities[pos]])
    if len(pos) == 0:
        unique, counts = np.empty((0, 3)), np.empty(0)
    else:
        unique, counts = np.unique(keys, axis=0, return_counts=True)
    return _PositiveStats(
        unique[:, 0].astype(np.int64),
        unique[:, 1].astype(np.int64),
        1.0 / unique[:, 2],
        counts.astype(np.float64),
        len(data),
    )


def _objective(stats: _PositiveStats, fm: FeatureMap, lam: float):
    design = pair_matrix(fm).reshape(fm.n_contexts, fm.n_actions, fm.dimension)
    phi = design[stats.contexts, stats.actions]

    def fun(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        log_pi = log_softmax(design @ theta, axis=1)
        w = np.exp(log_pi[stats.contexts, stats.actions]) * stats.inv_propensity
        value = float(stats.counts @ ls_term(w, lam)) / stats.n_total
        pi = np.exp(log_pi[stats.contexts])
        mean_phi = np.einsum("ka,kad->kd", pi, design[stats.contexts])
        coef = stats.counts * w / (1.0 + lam * w) / stats.n_total
        grad = coef @ (phi - mean_phi)
        return value, grad

    return fun


def ls_ips_objective(theta: np.ndarray, data: LoggedDataset, fm: FeatureMap, lam: float) -> Tuple[float, np.ndarray]:
    """
    LS-IPS objective (to maximize) and its gradient.

    Args:
        theta (np.ndarray): Score weights
        data (LoggedDataset): Logged samples with propensities
        fm (FeatureMap): Feature map of the scores
        lam (float): Smoothing strength, > 0

    Returns:
        Tuple[float, np.ndarray]: J(theta) and dJ/dtheta
    """
    return _objective(_positive_stats(data), fm, lam)(np.asarray(theta, dtype=np.float64))


def train_ls_ips(data: LoggedDataset, spec: LearnerSpec) -> SoftmaxPolicy:
    """
    Learn a softmax policy by maximizing the LS-IPS objective from theta = 0.

    Args:
        data (LoggedDataset): Logged samples
        spec (LearnerSpec): LS-IPS spec; spec.ls_lambda is the smoothing strength

    Returns:
        SoftmaxPolicy: Score-link softmax (alpha = 1) over the learned LinearModel

    Raises:
        PreconditionError: If data is empty
        CoverageError: If a propensity is zero
        NumericalError: If the objective becomes non-finite
    """
    if spec.kind is not LearnerKind.LS_IPS or spec.ls_lambda is None:
        raise PreconditionError("train_ls_ips needs an LS-IPS spec with ls_lambda set")
    fm, lam, cfg = spec.feature_map, spec.ls_lambda, spec.train_cfg
    objective = _objective(_positive_stats(data), fm, lam)

    def negated(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad = objective(theta)
        return -value, -grad

    result = minimize(negated, np.zeros(fm.dimension), cfg)
    if not np.isfinite(result.x).all():
        raise NumericalError("LS-IPS weights diverged", result.iterations)
    logger.debug(
        f"LS-IPS lambda={lam:g}: objective {-result.value:.6f} after {result.iterations} iterations"
    )
    meta = TrainMeta(result.iterations, result.grad_norm, 0.0, result.converged, cfg.step_rule.value)
    return SoftmaxPolicy(LinearModel(result.x, fm, meta), alpha=1.0, link=Link.SCORE)


def ips_estimate(data: LoggedDataset, pi: Policy) -> float:
    """
    Inverse-propensity estimate of a policy's expected reward on logged data.

    Args:
        data (LoggedDataset): Logged samples
        pi (Policy): Policy to evaluate

    Returns:
        float: mean of y * pi(a|x) / propensity
    """
    if len(data) == 0:
        raise PreconditionError("IPS estimate needs at least one logged sample")
    table = pi.probs_table()
    ratio = table[data.contexts, data.actions] / data.propensities
    return float(np.mean(data.rewards * ratio))


def tune_lambda(train: LoggedDataset, valid: LoggedDataset, spec: LearnerSpec) -> float:
    """
    Pick the lambda whose policy has the best held-out IPS estimate.

    Ties go to the earlier grid value.
    """
    grid = spec.lambda_grid or DEFAULT_LAMBDA_GRID
    best_lam, best_value = grid[0], -np.inf
    for lam in grid:
        policy = train_ls_ips(train, replace(spec, ls_lambda=lam))
        value = ips_estimate(valid, policy)
        logger.debug(f"lambda={lam:g}: held-out IPS estimate {value:.6f}")
        if value > best_value:
            best_lam, best_value = lam, value
    return best_lam
