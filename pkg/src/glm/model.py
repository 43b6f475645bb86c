"""
Linear Models

A LinearModel holds one weight per feature of its FeatureMap. Its score for
(x, a) is weights . featurize(x, a); its predicted probability is the
sigmoid of that score.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.special import expit

from src.env.space import Action, Context
from src.errors import ConfigurationError
from src.glm.features import FeatureMap, featurize, pair_matrix


@dataclass(frozen=True)
class TrainMeta:
    """
    What the optimizer reported when the model was fitted.

    Attributes:
        iterations (int): Iterations performed
        grad_norm (float): Final gradient infinity-norm
        l2 (float): L2 strength used
        converged (bool): Whether grad_norm reached the tolerance
        step_rule (str): Step rule used
    """

    iterations: int
    grad_norm: float
    l2: float
    converged: bool
    step_rule: str = "backtracking"


@dataclass(frozen=True, eq=False)
class LinearModel:
    """
    Weight vector over a feature map.

    Attributes:
        weights (np.ndarray): Finite weights, length feature_map.dimension
        feature_map (FeatureMap): Features the weights apply to
        train_meta (TrainMeta, optional): Optimizer report
    """

    weights: np.ndarray
    feature_map: FeatureMap
    train_meta: Optional[TrainMeta] = field(default=None)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.shape != (self.feature_map.dimension,):
            raise ConfigurationError(
                f"Model needs {self.feature_map.dimension} weights, got shape {w.shape}"
            )
        if not np.isfinite(w).all():
            raise ConfigurationError("Model weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls, feature_map: FeatureMap) -> "LinearModel":
        return cls(np.zeros(feature_map.dimension), feature_map)

    @property
    def n_contexts(self) -> int:
        return self.feature_map.n_contexts

    @property
    def n_actions(self) -> int:
        return self.feature_map.n_actions

    def score_table(self) -> np.ndarray:
        """Scores of every pair, shape (n_contexts, n_actions)."""
        return (pair_matrix(self.feature_map) @ self.weights).reshape(self.n_contexts, self.n_actions)

    def prob_table(self) -> np.ndarray:
        return expit(self.score_table())

    def with_weights(self, weights: np.ndarray) -> "LinearModel":
        return LinearModel(weights, self.feature_map, self.train_meta)

    def __repr__(self) -> str:
        return f"LinearModel(dim={self.feature_map.dimension})"


def predict_prob(m: LinearModel, x: Context, a: Action) -> float:
    """
    Predicted probability for one pair.

    Args:
        m (LinearModel): Model
        x (Context): Context
        a (Action): Action

    Returns:
        float: sigmoid(weights . featurize(x, a))
    """
    return float(expit(featurize(m.feature_map, x, a) @ m.weights))


def model_to_json(m: LinearModel, **tags: Any) -> Dict[str, Any]:
    """
    JSON document for a model.

    Extra keyword tags (for example learner_kind, ls_lambda) are stored at the
    top level.
    """
    doc: Dict[str, Any] = {
        "feature_mask": m.feature_map.to_json(),
        "n_context_bits": m.feature_map.n_context_bits,
        "weights": m.weights.tolist(),
        "train_meta": None,
    }
    if m.train_meta is not None:
        meta = m.train_meta
        doc["train_meta"] = {
            "iterations": meta.iterations,
            "grad_norm": meta.grad_norm,
            "l2": meta.l2,
            "converged": meta.converged,
            "step_rule": meta.step_rule,
        }
    doc.update(tags)
    return doc


def model_from_json(doc: Dict[str, Any]) -> LinearModel:
    """Rebuild a model written by model_to_json."""
    fm = FeatureMap(tuple(doc["feature_mask"]), int(doc.get("n_context_bits", 7)))
    meta = doc.get("train_meta")
    return LinearModel(
        np.array(doc["weights"], dtype=np.float64),
        fm,
        TrainMeta(**meta) if meta else None,
    )
