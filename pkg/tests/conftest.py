"""Shared fixtures."""

import numpy as np
import pytest

from src.env.environment import EnvConfig, generate_environment
from src.policy.policies import UniformPolicy

MICRO = EnvConfig(n_context_bits=2, n_action_bits=2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def env():
    """Default-size environment: 128 contexts, 32 actions."""
    return generate_environment(2024)


@pytest.fixture
def micro_env():
    """4 contexts x 4 actions, small enough for exact enumeration."""
    return generate_environment(7, MICRO)


@pytest.fixture
def uniform(env):
    return UniformPolicy(env.n_contexts, env.n_actions)


@pytest.fixture
def micro_uniform(micro_env):
    return UniformPolicy(micro_env.n_contexts, micro_env.n_actions)
