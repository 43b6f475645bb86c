"""Logged data collection and the CSI transforms."""

from .collect import LoggedDataset, LoggedSample, collect_dataset, split_holdout
from .transform import CsiDataset, CsiExample, CsiVariant, csi_transform_expect, csi_transform_sampling

__all__ = [
    "CsiDataset",
    "CsiExample",
    "CsiVariant",
    "LoggedDataset",
    "LoggedSample",
    "collect_dataset",
    "csi_transform_expect",
    "csi_transform_sampling",
    "split_holdout",
]
