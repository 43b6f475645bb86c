"""
Offline Learners

Direct Method, CSI in its two variants, and LS-IPS, each turning a logged
dataset into a policy. fit_learner adds held-out hyper-parameter selection
on top of the plain trainers.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from src.errors import EmptyTransformError, PreconditionError
from src.glm.logistic import WeightedRows, train_logistic, tune_l2
from src.glm.model import LinearModel
from src.learners.ls_ips import train_ls_ips, tune_lambda
from src.learners.spec import LearnerKind, LearnerSpec
from src.pipeline.collect import LoggedDataset
from src.pipeline.transform import CsiVariant, csi_transform
from src.policy.policies import GreedyPolicy, Policy, SoftmaxPolicy

logger = logging.getLogger(__name__)

_CSI_VARIANTS = {
    LearnerKind.CSI_SAMPLING: CsiVariant.SAMPLING,
    LearnerKind.CSI_EXPECT: CsiVariant.EXPECT,
}


def train_dm(data: LoggedDataset, spec: LearnerSpec) -> LinearModel:
    """
    Direct Method: logistic model of the reward.

    Args:
        data (LoggedDataset): Logged samples, non-empty
        spec (LearnerSpec): Feature map and training settings

    Returns:
        LinearModel: Model of p(Y=1|x, a)
    """
    if len(data) == 0:
        raise PreconditionError("train_dm needs at least one logged sample")
    return train_logistic(data.to_rows(), spec.feature_map, spec.train_cfg)


def _csi_rows(data: LoggedDataset, pi0: Policy, variant: CsiVariant, rng: np.random.Generator) -> WeightedRows:
    csi = csi_transform(data, pi0, variant, rng)
    if len(csi) == 0:
        raise EmptyTransformError(f"CSI needs at least one positive sample, {data!r} has none")
    return csi.to_rows()


def train_csi(
    data: LoggedDataset,
    pi0: Policy,
    variant: CsiVariant,
    spec: LearnerSpec,
    rng: Optional[np.random.Generator] = None,
) -> LinearModel:
    """
    Counterfactual Sample Identification classifier.

    Args:
        data (LoggedDataset): Log collected under pi0
        pi0 (Policy): The logging policy
        variant (CsiVariant): Sampling or expectation transform
        spec (LearnerSpec): Feature map and training settings
        rng (np.random.Generator, optional): Stream for counterfactual draws;
            required by the sampling variant

    Returns:
        LinearModel: Model of P(Z=1 | x, b, Y=1)

    Raises:
        EmptyTransformError: If data holds no positive sample
    """
    if variant is CsiVariant.SAMPLING and rng is None:
        raise PreconditionError("The sampling variant needs a random stream")
    return train_logistic(_csi_rows(data, pi0, variant, rng), spec.feature_map, spec.train_cfg)


def greedy_policy(m: LinearModel) -> GreedyPolicy:
    """Play argmax_a m(x, a), ties to the lowest action index."""
    return GreedyPolicy(m)


@dataclass
class LearnerFit:
    """
    A trained learner with the hyper-parameters it ended up using.

    Attributes:
        kind (LearnerKind): Learning method
        model (LinearModel): Learned scores
        policy (GreedyPolicy): Greedy policy over the scores
        softmax_policy (SoftmaxPolicy, optional): LS-IPS stochastic policy
        l2 (float, optional): L2 strength used by GLM learners
        ls_lambda (float, optional): Lambda used by LS-IPS
        converged (bool): Whether the final optimization converged
    """

    kind: LearnerKind
    model: LinearModel
    policy: GreedyPolicy
    softmax_policy: Optional[SoftmaxPolicy] = None
    l2: Optional[float] = None
    ls_lambda: Optional[float] = None
    converged: bool = True


def _fit_glm(spec, data, pi0, rng, split) -> Tuple[LinearModel, float]:
    variant = _CSI_VARIANTS.get(spec.kind)

    def rows(part: LoggedDataset) -> WeightedRows:
        return part.to_rows() if variant is None else _csi_rows(part, pi0, variant, rng)

    l2 = spec.train_cfg.l2
    if spec.l2_grid and split is not None:
        train, valid = split
        l2 = tune_l2(rows(train), rows(valid), spec.feature_map, spec.train_cfg, spec.l2_grid)
    model = train_logistic(rows(data), spec.feature_map, replace(spec.train_cfg, l2=l2))
    return model, l2


def fit_learner(
    spec: LearnerSpec,
    data: LoggedDataset,
    pi0: Policy,
    rng: np.random.Generator,
    split: Optional[Tuple[LoggedDataset, LoggedDataset]] = None,
) -> LearnerFit:
    """
    Train a learner, tuning its hyper-parameter on a held-out split first.

    L2 (GLM learners) is chosen by weighted validation log-loss and lambda
    (LS-IPS) by held-out IPS estimate; the final model is refit on all of
    data with the chosen value. Without a split or a grid the LearnerSpec's own
    value is used.

    Args:
        spec (LearnerSpec): What to train
        data (LoggedDataset): All training data
        pi0 (Policy): Policy that logged data
        rng (np.random.Generator): Stream for CSI counterfactual draws
        split (Tuple[LoggedDataset, LoggedDataset], optional): (train, valid)
            parts of data used for tuning

    Returns:
        LearnerFit: The trained learner
    """
    if spec.kind is LearnerKind.LS_IPS:
        lam = spec.ls_lambda
        if spec.lambda_grid and split is not None:
            lam = tune_lambda(split[0], split[1], spec)
        softmax = train_ls_ips(data, replace(spec, ls_lambda=lam))
        model = softmax.scorer
        return LearnerFit(
            spec.kind, model, greedy_policy(model), softmax, ls_lambda=lam,
            converged=model.train_meta.converged,
        )

    model, l2 = _fit_glm(spec, data, pi0, rng, split)
    logger.debug(f"{spec.kind.value}: l2={l2:g}, converged={model.train_meta.converged}")
    return LearnerFit(spec.kind, model, greedy_policy(model), l2=l2, converged=model.train_meta.converged)
