"""Learner specifications."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

from src.errors import ConfigurationError
from src.glm.features import FeatureMap
from src.glm.optimize import TrainConfig


class LearnerKind(Enum):
    DM = "dm"
    CSI_SAMPLING = "csi_sampling"
    CSI_EXPECT = "csi_expect"
    LS_IPS = "ls_ips"


@dataclass(frozen=True)
class LearnerSpec:
    """
    How to train one offline learner.

    Attributes:
        kind (LearnerKind): Learning method
        feature_map (FeatureMap): Features the model or policy sees
        train_cfg (TrainConfig): Optimizer settings (l2 is ignored by LS-IPS)
        ls_lambda (float, optional): LS smoothing strength, required for LS-IPS
        l2_grid (Tuple[float, ...]): L2 candidates for held-out tuning; empty
            means use train_cfg.l2 as is
        lambda_grid (Tuple[float, ...]): LS-IPS lambda candidates; empty means
            use ls_lambda as is
    """

    kind: LearnerKind
    feature_map: FeatureMap = field(default_factory=FeatureMap.full)
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    ls_lambda: Optional[float] = None
    l2_grid: Tuple[float, ...] = ()
    lambda_grid: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind is LearnerKind.LS_IPS:
            if self.ls_lambda is None and not self.lambda_grid:
                raise ConfigurationError("LS-IPS needs ls_lambda or a lambda_grid")
            candidates = list(self.lambda_grid) + ([self.ls_lambda] if self.ls_lambda is not None else [])
            if any(not lam > 0 for lam in candidates):
                raise ConfigurationError(f"ls_lambda must be > 0, got {candidates}")
        if any(l2 < 0 for l2 in self.l2_grid):
            raise ConfigurationError(f"l2 candidates must be >= 0, got {self.l2_grid}")
