"""
Error Types

Every failure raised by the library derives from BenchError. Each subclass
also inherits the builtin exception that describes it (ValueError for bad
input, RuntimeError for failures while computing), so callers that only
know the builtins still catch them.
"""

from typing import Optional


class BenchError(Exception):
    """Base class for all library errors."""


class ConfigurationError(BenchError, ValueError):
    """Invalid environment, training or experiment configuration."""


class PreconditionError(BenchError, ValueError):
    """An operation was called with arguments violating its preconditions."""


class PolicyError(BenchError, ValueError):
    """A policy produced a distribution that is not a valid probability vector."""


class CoverageError(BenchError, ValueError):
    """A logged or supplied propensity is zero (the logging policy lacks coverage)."""


class EmptyTransformError(BenchError, ValueError):
    """The CSI transform produced no rows because the data holds no positives."""


class DegenerateEnvironmentError(BenchError, RuntimeError):
    """
    Best and worst deterministic policy values coincide.

    Attributes:
        env_seed (int, optional): Seed of the offending environment, when known
    """

    def __init__(self, message: str, env_seed: Optional[int] = None):
        super().__init__(message)
        self.env_seed = env_seed

    def with_seed(self, env_seed: int) -> "DegenerateEnvironmentError":
        """Return a copy of this error tagged with the environment seed."""
        return DegenerateEnvironmentError(f"{self} (env_seed={env_seed})", env_seed=env_seed)


class NumericalError(BenchError, RuntimeError):
    """
    The optimization objective became non-finite.

    Attributes:
        iteration (int): Optimizer iteration at which it happened
    """

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration
