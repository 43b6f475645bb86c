"""
Policies

A policy maps each context to a distribution over actions. Policies are
immutable; sampling uses a caller-owned random stream. Model-based policies
work with any "scorer": an object whose score_table() returns logits of
shape (n_contexts, n_actions). Learned LinearModels and Environments (the
reward oracle) are both scorers.
"""

import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Protocol, Sequence, Tuple

import numpy as np
from scipy.special import expit, softmax

from src.env.space import Action, Context
from src.errors import ConfigurationError

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


class Scorer(Protocol):
    n_contexts: int
    n_actions: int

    def score_table(self) -> np.ndarray:
        ...


class Link(Enum):
    """How a SoftmaxPolicy turns scores into unnormalized weights."""
    PROBABILITY = "probability"  # sigmoid(score) ** alpha
    SCORE = "score"  # exp(alpha * score)


class Policy(ABC):
    """
    Base class for all policies.

    Subclasses implement probs_table(), the full (n_contexts, n_actions)
    distribution table; single-context queries read a row of it.
    """

    n_contexts: int
    n_actions: int

    @abstractmethod
    def probs_table(self) -> np.ndarray:
        """Distribution over actions for every context, rows summing to 1."""
        raise NotImplementedError

    def probs(self, x: Context) -> np.ndarray:
        """
        Distribution over actions in context x.

        Args:
            x (Context): Context

        Returns:
            np.ndarray: Vector of length n_actions, non-negative, summing to 1
        """
        return self.probs_table()[x.index]

    def sample_action(self, x: Context, rng: np.random.Generator) -> Tuple[Action, float]:
        """
        Draw an action and report its propensity.

        Args:
            x (Context): Context
            rng (np.random.Generator): Caller-owned seeded stream

        Returns:
            Tuple[Action, float]: The action and probs(x)[action]
        """
        p = self.probs(x)
        index = int(rng.choice(self.n_actions, p=p))
        n_bits = int(np.log2(self.n_actions))
        return Action.from_index(index, n_bits), float(p[index])


class UniformPolicy(Policy):
    """Every action with probability 1 / n_actions."""

    def __init__(self, n_contexts: int, n_actions: int):
        self.n_contexts = n_contexts
        self.n_actions = n_actions

    def probs_table(self) -> np.ndarray:
        return np.full((self.n_contexts, self.n_actions), 1.0 / self.n_actions)

    def __repr__(self) -> str:
        return f"UniformPolicy(actions={self.n_actions})"


class GreedyPolicy(Policy):
    """
    All mass on the best-scoring action, ties going to the lowest index.

    With minimize=True the policy picks the worst-scoring action instead.
    """

    def __init__(self, scorer: Scorer, minimize: bool = False):
        self.scorer = scorer
        self.minimize = minimize
        self.n_contexts = scorer.n_contexts
        self.n_actions = scorer.n_actions

    def actions(self) -> np.ndarray:
        """Chosen action index per context."""
        scores = self.scorer.score_table()
        return scores.argmin(axis=1) if self.minimize else scores.argmax(axis=1)

    def probs_table(self) -> np.ndarray:
        table = np.zeros((self.n_contexts, self.n_actions))
        table[np.arange(self.n_contexts), self.actions()] = 1.0
        return table

    def __repr__(self) -> str:
        return f"GreedyPolicy({self.scorer!r}, minimize={self.minimize})"


class EpsilonGreedyPolicy(Policy):
    """epsilon * uniform + (1 - epsilon) * greedy."""

    def __init__(self, scorer: Scorer, epsilon: float):
        if not 0.0 <= epsilon <= 1.0:
            raise ConfigurationError(f"epsilon must be in [0, 1], got {epsilon}")
        self.greedy = GreedyPolicy(scorer)
        self.epsilon = epsilon
        self.n_contexts = scorer.n_contexts
        self.n_actions = scorer.n_actions

    def probs_table(self) -> np.ndarray:
        return self.epsilon / self.n_actions + (1.0 - self.epsilon) * self.greedy.probs_table()

    def __repr__(self) -> str:
        return f"EpsilonGreedyPolicy(epsilon={self.epsilon})"


class SoftmaxPolicy(Policy):
    """
    Multinomial over actions driven by model scores.

    With the probability link, pi(a|x) is proportional to p_hat(x, a) ** alpha
    where p_hat = sigmoid(score) floored at 1e-12. With the score link it is
    proportional to exp(alpha * score).
    """

    def __init__(self, scorer: Scorer, alpha: float = 1.0, link: Link = Link.PROBABILITY):
        if not np.isfinite(alpha) or alpha < 0:
            raise ConfigurationError(f"alpha must be a non-negative number, got {alpha}")
        self.scorer = scorer
        self.alpha = alpha
        self.link = link
        self.n_contexts = scorer.n_contexts
        self.n_actions = scorer.n_actions

    def log_weights(self) -> np.ndarray:
        scores = self.scorer.score_table()
        if self.link is Link.SCORE:
            return self.alpha * scores
        return self.alpha * np.log(np.maximum(expit(scores), PROB_FLOOR))

    def probs_table(self) -> np.ndarray:
        return softmax(self.log_weights(), axis=1)

    def __repr__(self) -> str:
        return f"SoftmaxPolicy(alpha={self.alpha}, link={self.link.value})"


class MixturePolicy(Policy):
    """Fixed convex combination of policies over the same spaces."""

    def __init__(self, components: Sequence[Tuple[float, Policy]]):
        if not components:
            raise ConfigurationError("A mixture needs at least one component")
        weights = np.array([w for w, _ in components], dtype=np.float64)
        if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"Mixture weights must be non-negative and sum to 1, got {weights}")
        shapes = {(p.n_contexts, p.n_actions) for _, p in components}
        if len(shapes) != 1:
            raise ConfigurationError(f"Mixture components disagree on spaces: {shapes}")
        self.components = list(components)
        self.n_contexts, self.n_actions = shapes.pop()

    def probs_table(self) -> np.ndarray:
        return sum(w * p.probs_table() for w, p in self.components)

    def __repr__(self) -> str:
        inner = ", ".join(f"{w}*{p!r}" for w, p in self.components)
        return f"MixturePolicy({inner})"


def exploration_mixture(scorer: Scorer, uniform_share: float = 0.05, alpha: float = 1.0) -> MixturePolicy:
    """Production-style exploration: uniform_share uniform plus a p_hat ** alpha multinomial."""
    uniform = UniformPolicy(scorer.n_contexts, scorer.n_actions)
    return MixturePolicy([(uniform_share, uniform), (1.0 - uniform_share, SoftmaxPolicy(scorer, alpha))])


def probs(pi: Policy, x: Context) -> np.ndarray:
    """Distribution of pi over actions in context x."""
    return pi.probs(x)


def sample_action(pi: Policy, x: Context, rng: np.random.Generator) -> Tuple[Action, float]:
    """Draw an action from pi in context x together with its propensity."""
    return pi.sample_action(x, rng)
