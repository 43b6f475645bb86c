"""
Child Seed Derivation

Every random stream of an experiment is seeded from

    derive_seed(master_seed, env_index, stage, size_index)

chained through the SplitMix64 finalizer. A stream depends only on those four
values, so changing the sample sizes or the learner list never alters the
environments or the data of other cells.
"""

from enum import IntEnum

import numpy as np

MASK64 = (1 << 64) - 1


class Stage(IntEnum):
    ENVIRONMENT = 0
    FIRST_COLLECT = 1
    FIRST_SPLIT = 2
    FIRST_FIT = 3
    SECOND_COLLECT = 4
    SECOND_SPLIT = 5
    LEARNER = 16  # learner k uses LEARNER + k


def splitmix64(value: int) -> int:
    """One SplitMix64 step: advance the state and return its mixed output."""
    z = (value + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, env_index: int, stage: int, size_index: int = 0) -> int:
    """
    64-bit child seed for one (environment, stage, sample size) stream.

    Args:
        master_seed (int): Experiment master seed
        env_index (int): Environment number
        stage (int): Stage tag, see Stage
        size_index (int): Position of the sample size in the config

    Returns:
        int: Seed in [0, 2**64)
    """
    h = splitmix64(master_seed & MASK64)
    for part in (env_index, int(stage), size_index):
        h = splitmix64(h ^ (part & MASK64))
    return h


def stage_rng(master_seed: int, env_index: int, stage: int, size_index: int = 0) -> np.random.Generator:
    """Independent generator for one stream."""
    return np.random.default_rng(derive_seed(master_seed, env_index, stage, size_index))
