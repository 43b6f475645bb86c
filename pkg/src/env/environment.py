"""
Synthetic Contextual-Bandit Environments

An environment is a categorical distribution over contexts plus a logistic
reward oracle over the oracle feature map. Both are drawn from a seeded
generator, and because the spaces are small every policy can be evaluated
exactly by enumerating all (context, action) pairs.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.special import expit, softmax

from src.env.space import ACTION_BITS, CONTEXT_BITS, Action, Context, check_action, check_context
from src.errors import ConfigurationError, DegenerateEnvironmentError, PolicyError
from src.glm.features import FeatureMap, featurize, pair_matrix

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
NORMALIZATION_TOL = 1e-9
DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class EnvConfig:
    """
    Parameters of the random environment generator.

    Attributes:
        n_context_bits (int): Context bits (7 gives 128 contexts)
        n_action_bits (int): Action bits (5 gives 32 actions)
        context_scale (float): Std of oracle coefficients on context bits
        action_scale (float): Std of oracle coefficients on action bits
        interaction_scale (float): Std of oracle x*a and a*a coefficients
        bias_scale (float): Std of the oracle bias before shifting
        bias_shift (float): Added to the drawn bias
        logit_scale (float): Std of the context logits
        inactive_context_bits (Tuple[int, ...]): Context bits whose oracle
            coefficients (main effect and interactions) are forced to zero
    """

    n_context_bits: int = CONTEXT_BITS
    n_action_bits: int = ACTION_BITS
    context_scale: float = 2.0
    action_scale: float = 1.0
    interaction_scale: float = 1.0
    bias_scale: float = 1.0
    bias_shift: float = -2.0
    logit_scale: float = 1.0
    inactive_context_bits: Tuple[int, ...] = field(default_factory=tuple)

    def validate(self) -> None:
        """
        Check the configuration.

        Raises:
            ConfigurationError: If a scale is non-positive or a bit count is invalid
        """
        for name in ("context_scale", "action_scale", "interaction_scale", "bias_scale", "logit_scale"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if self.n_context_bits < 1 or self.n_action_bits < 1:
            raise ConfigurationError("Context and action spaces need at least one bit each")
        if any(not 0 <= b < self.n_context_bits for b in self.inactive_context_bits):
            raise ConfigurationError(f"inactive_context_bits out of range: {self.inactive_context_bits}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EnvConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"Unknown environment config keys: {sorted(unknown)}")
        data = dict(data)
        if "inactive_context_bits" in data:
            data["inactive_context_bits"] = tuple(data["inactive_context_bits"])
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["inactive_context_bits"] = list(self.inactive_context_bits)
        return data


@dataclass(frozen=True, eq=False)
class Environment:
    """
    An immutable synthetic environment.

    Attributes:
        context_logits (np.ndarray): Logits of the categorical context distribution
        oracle_weights (np.ndarray): Coefficients over the oracle feature map
        seed (int): Seed the environment was generated from
        config (EnvConfig): Generator configuration
    """

    context_logits: np.ndarray
    oracle_weights: np.ndarray
    seed: int
    config: EnvConfig = field(default_factory=EnvConfig)

    def __post_init__(self):
        fm = self.oracle_map
        logits = np.array(self.context_logits, dtype=np.float64)
        weights = np.array(self.oracle_weights, dtype=np.float64)
        if logits.shape != (fm.n_contexts,):
            raise ConfigurationError(f"Expected {fm.n_contexts} context logits, got {logits.shape}")
        if weights.shape != (fm.dimension,):
            raise ConfigurationError(f"Expected {fm.dimension} oracle weights, got {weights.shape}")
        logits.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "context_logits", logits)
        object.__setattr__(self, "oracle_weights", weights)

    @property
    def oracle_map(self) -> FeatureMap:
        return FeatureMap.oracle(self.config.n_context_bits, self.config.n_action_bits)

    @property
    def n_contexts(self) -> int:
        return 2 ** self.config.n_context_bits

    @property
    def n_actions(self) -> int:
        return 2 ** self.config.n_action_bits

    def score_table(self) -> np.ndarray:
        """Oracle logits, shape (n_contexts, n_actions)."""
        return (pair_matrix(self.oracle_map) @ self.oracle_weights).reshape(self.n_contexts, self.n_actions)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.config == other.config
            and np.array_equal(self.context_logits, other.context_logits)
            and np.array_equal(self.oracle_weights, other.oracle_weights)
        )

    def __repr__(self) -> str:
        return f"Environment(seed={self.seed}, contexts={self.n_contexts}, actions={self.n_actions})"


def _oracle_coefficient_scales(config: EnvConfig) -> np.ndarray:
    """Per-coefficient standard deviations, in oracle feature order."""
    nx, na = config.n_context_bits, config.n_action_bits
    n_pairs = na * (na - 1) // 2
    return np.concatenate([
        np.full(nx, config.context_scale),
        np.full(na, config.action_scale),
        np.full(nx * na, config.interaction_scale),
        np.full(n_pairs, config.interaction_scale),
        [config.bias_scale],
    ])


def generate_environment(seed: int, config: Optional[EnvConfig] = None) -> Environment:
    """
    Draw a random environment.

    Args:
        seed (int): 64-bit unsigned seed; equal seeds and configs give equal environments
        config (EnvConfig, optional): Generator configuration, defaults to EnvConfig()

    Returns:
        Environment: The generated environment

    Raises:
        ConfigurationError: If the configuration is invalid
    """
    config = config or EnvConfig()
    config.validate()
    if not 0 <= seed < 2 ** 64:
        raise ConfigurationError(f"Seed must be a 64-bit unsigned integer, got {seed}")

    rng = np.random.default_rng(seed)
    logits = rng.normal(0.0, config.logit_scale, size=2 ** config.n_context_bits)
    weights = rng.normal(0.0, 1.0, size=FeatureMap.oracle(config.n_context_bits, config.n_action_bits).dimension)
    weights *= _oracle_coefficient_scales(config)
    weights[-1] += config.bias_shift

    nx, na = config.n_context_bits, config.n_action_bits
    for bit in config.inactive_context_bits:
        weights[bit] = 0.0
        start = nx + na + bit * na
        weights[start:start + na] = 0.0

    env = Environment(context_logits=logits, oracle_weights=weights, seed=seed, config=config)
    logger.debug(f"Generated {env}")
    return env


def context_probs(env: Environment) -> np.ndarray:
    """Probability of every context, ordered by index."""
    return softmax(env.context_logits)


def reward_table(env: Environment) -> np.ndarray:
    """p(Y=1|x,a) for every pair, shape (n_contexts, n_actions)."""
    return expit(env.score_table())


def true_reward_prob(env: Environment, x: Context, a: Action) -> float:
    """
    Probability of a positive reward for action a in context x.

    Args:
        env (Environment): Environment
        x (Context): Context
        a (Action): Action

    Returns:
        float: sigmoid(oracle_weights . oracle_featurize(x, a)), in (0, 1); scores
            beyond about 37 round to 1.0
    """
    check_context(x, env.config.n_context_bits)
    check_action(a, env.config.n_action_bits)
    return float(expit(featurize(env.oracle_map, x, a) @ env.oracle_weights))


def sample_contexts(env: Environment, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n context indices from the context distribution."""
    return rng.choice(env.n_contexts, size=n, p=context_probs(env))


def sample_context(env: Environment, rng: np.random.Generator) -> Context:
    """
    Draw one context.

    Args:
        env (Environment): Environment
        rng (np.random.Generator): Caller-owned seeded stream

    Returns:
        Context: The drawn context
    """
    index = int(sample_contexts(env, 1, rng)[0])
    return Context.from_index(index, env.config.n_context_bits)


def draw_actions(table: np.ndarray, contexts: np.ndarray, u: np.ndarray) -> np.ndarray:
    """
    Inverse-CDF draw of one action per row.

    Row i gets the number of cumulative probabilities of table[contexts[i]]
    that are <= u[i], capped at the last action.

    Args:
        table (np.ndarray): (n_contexts, n_actions) policy table
        contexts (np.ndarray): Context index of every row
        u (np.ndarray): Uniform [0, 1) draw of every row

    Returns:
        np.ndarray: Action index of every row
    """
    contexts = np.asarray(contexts, dtype=np.int64)
    actions = np.zeros(len(contexts), dtype=np.int64)
    if len(contexts) == 0:
        return actions
    cdf = np.cumsum(table, axis=1)
    order = np.argsort(contexts, kind="stable")
    sorted_contexts = contexts[order]
    bounds = np.r_[np.flatnonzero(np.r_[True, sorted_contexts[1:] != sorted_contexts[:-1]]), len(order)]
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        rows = order[lo:hi]
        actions[rows] = np.searchsorted(cdf[sorted_contexts[lo]], u[rows], side="right")
    return np.minimum(actions, table.shape[1] - 1)


def _policy_table(env: Environment, pi) -> np.ndarray:
    table = np.asarray(pi.probs_table(), dtype=np.float64)
    if table.shape != (env.n_contexts, env.n_actions):
        raise PolicyError(
            f"Policy table has shape {table.shape}, expected {(env.n_contexts, env.n_actions)}"
        )
    if not np.isfinite(table).all():
        raise PolicyError(f"Policy {pi!r} has non-finite probabilities")
    deviation = np.abs(table.sum(axis=1) - 1.0).max()
    if deviation > NORMALIZATION_TOL or (table < 0).any():
        raise PolicyError(f"Policy {pi!r} is not a probability distribution (max deviation {deviation:.3e})")
    return table


def policy_value(env: Environment, pi) -> float:
    """
    Exact expected reward of a policy.

    Computes sum_x p(x) sum_a pi(a|x) p(Y=1|x,a) over all pairs, no sampling.

    Args:
        env (Environment): Environment
        pi (Policy): Any policy exposing probs_table()

    Returns:
        float: Expected reward

    Raises:
        PolicyError: If some context's distribution does not sum to 1 within 1e-9
    """
    table = _policy_table(env, pi)
    per_context = (table * reward_table(env)).sum(axis=1)
    return float(context_probs(env) @ per_context)


def value_bounds(env: Environment) -> Tuple[float, float]:
    """(worst, best): values of the worst and the best deterministic policies."""
    rewards = reward_table(env)
    px = context_probs(env)
    return float(px @ rewards.min(axis=1)), float(px @ rewards.max(axis=1))


def normalized_value(env: Environment, pi) -> float:
    """
    Policy value rescaled so the best policy scores 1 and the worst 0.

    Args:
        env (Environment): Environment
        pi (Policy): Policy to evaluate

    Returns:
        float: (value - worst) / (best - worst)

    Raises:
        DegenerateEnvironmentError: If best - worst < 1e-12
    """
    worst, best = value_bounds(env)
    if best - worst < DEGENERACY_TOL:
        raise DegenerateEnvironmentError(
            f"Best and worst policy values coincide ({best!r})", env_seed=env.seed
        )
    return (policy_value(env, pi) - worst) / (best - worst)


def rollout_value(env: Environment, pi, n_steps: int, rng: np.random.Generator) -> Tuple[float, float]:
    """
    Monte-Carlo estimate of a policy value.

    Args:
        env (Environment): Environment
        pi (Policy): Policy to roll out
        n_steps (int): Number of simulated interactions
        rng (np.random.Generator): Caller-owned seeded stream

    Returns:
        Tuple[float, float]: Mean reward and its standard error
    """
    table = _policy_table(env, pi)
    contexts = sample_contexts(env, n_steps, rng)
    actions = draw_actions(table, contexts, rng.random(n_steps))
    rewards = rng.random(n_steps) < reward_table(env)[contexts, actions]
    mean = float(rewards.mean())
    stderr = float(rewards.std(ddof=1) / np.sqrt(n_steps))
    return mean, stderr


def environment_to_json(env: Environment) -> Dict[str, Any]:
    """Versioned JSON document describing an environment."""
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": env.seed,
        "config": env.config.to_dict(),
        "context_logits": env.context_logits.tolist(),
        "oracle_weights": env.oracle_weights.tolist(),
    }


def environment_from_json(doc: Dict[str, Any]) -> Environment:
    """
    Rebuild an environment from environment_to_json output.

    Raises:
        ConfigurationError: On an unknown schema version or malformed document
    """
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"Unsupported environment schema_version: {version}")
    try:
        return Environment(
            context_logits=np.array(doc["context_logits"], dtype=np.float64),
            oracle_weights=np.array(doc["oracle_weights"], dtype=np.float64),
            seed=int(doc["seed"]),
            config=EnvConfig.from_dict(doc.get("config", {})),
        )
    except KeyError as e:
        raise ConfigurationError(f"Environment document is missing {e}") from e
