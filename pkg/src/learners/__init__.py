"""Offline policy learners."""

from .spec import LearnerKind, LearnerSpec
from .ls_ips import train_ls_ips
from .learners import LearnerFit, fit_learner, greedy_policy, train_csi, train_dm

__all__ = [
    "LearnerFit",
    "LearnerKind",
    "LearnerSpec",
    "fit_learner",
    "greedy_policy",
    "train_csi",
    "train_dm",
    "train_ls_ips",
]
