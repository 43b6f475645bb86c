"""
Exact Bayes-Optimal CSI Probabilities

Enumerates the generating process of the CSI transform in an environment
with a known oracle:

    Z ~ Bernoulli(0.5), A ~ pi0(.|x), A' ~ pi0(.|x) independent of A,
    Y ~ Bernoulli(p(Y=1|x, A)), B = A if Z = 1 else A'

and returns P(Z=1 | B=b, X=x, Y=1), the function a CSI classifier converges
to with unlimited data and a rich enough model.
"""

from typing import Tuple

import numpy as np
from scipy.special import expit

from src.env.environment import Environment, reward_table
from src.policy.policies import Policy


def _joint_z_b(env: Environment, pi0: Policy) -> Tuple[np.ndarray, np.ndarray]:
    """P(Z=z, B=b, Y=1 | X=x) for z = 1 and z = 0, each (n_contexts, n_actions)."""
    pi = pi0.probs_table()
    p = reward_table(env)
    n_actions = pi.shape[1]
    joint = {0: np.zeros_like(p), 1: np.zeros_like(p)}
    for z in (0, 1):
        for a in range(n_actions):
            for a_resampled in range(n_actions):
                mass = 0.5 * pi[:, a] * pi[:, a_resampled] * p[:, a]
                b = a if z == 1 else a_resampled
                joint[z][:, b] += mass
    return joint[1], joint[0]


def bayes_csi_probability(env: Environment, pi0: Policy) -> np.ndarray:
    """
    P(Z=1 | B=b, X=x, Y=1) for every pair, by enumeration.

    Pairs with pi0(b|x) = 0 cannot appear in the transformed data and are NaN.
    """
    z1, z0 = _joint_z_b(env, pi0)
    total = z1 + z0
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, z1 / total, np.nan)


def csi_log_ratio_form(env: Environment, pi0: Policy) -> np.ndarray:
    """sigmoid(log(P(Y=1|x, a) / P(Y=1|x))) with P(Y=1|x) taken under pi0."""
    p = reward_table(env)
    baseline = (pi0.probs_table() * p).sum(axis=1, keepdims=True)
    return expit(np.log(p) - np.log(baseline))


def context_marginal_z(env: Environment, pi0: Policy) -> np.ndarray:
    """P(Z=1 | Y=1, X=x) for every context."""
    z1, z0 = _joint_z_b(env, pi0)
    return z1.sum(axis=1) / (z1 + z0).sum(axis=1)
