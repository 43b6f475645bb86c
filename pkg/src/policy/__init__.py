"""Stochastic and deterministic policies over the action space."""

from .policies import (
    EpsilonGreedyPolicy,
    GreedyPolicy,
    Link,
    MixturePolicy,
    Policy,
    SoftmaxPolicy,
    UniformPolicy,
    exploration_mixture,
)

__all__ = [
    "EpsilonGreedyPolicy",
    "GreedyPolicy",
    "Link",
    "MixturePolicy",
    "Policy",
    "SoftmaxPolicy",
    "UniformPolicy",
    "exploration_mixture",
]
