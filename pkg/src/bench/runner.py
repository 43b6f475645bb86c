"""
Experiment Runner

One cell is one (environment, sample size) pair run through the two-stage
protocol:

    1. generate the environment
    2. log n samples under the uniform policy
    3. fit the first-stage model (DM or CSI-expect, L2 tuned on a holdout)
    4. log n fresh samples under epsilon-greedy over that model
    5. train every learner on the second log
    6. evaluate each learner's greedy policy exactly, normalized to [0, 1]

An "Oracle" row (greedy on the true reward) is added to every cell as a
reference and always scores 1.
"""

import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

from src.bench.config import ExperimentConfig, LearnerEntry, Scenario, labelled_specs
from src.bench.coordinator import ExperimentCoordinator
from src.bench.results import ORACLE_LABEL, CellRecord, ExperimentResult
from src.bench.seeding import Stage, derive_seed, stage_rng
from src.env.environment import generate_environment, normalized_value
from src.errors import DegenerateEnvironmentError, PreconditionError
from src.learners.learners import fit_learner
from src.learners.ls_ips import ips_estimate
from src.learners.spec import LearnerKind, LearnerSpec
from src.pipeline.collect import collect_dataset, split_holdout
from src.policy.policies import EpsilonGreedyPolicy, GreedyPolicy, UniformPolicy

logger = logging.getLogger(__name__)


def environment_seed(config: ExperimentConfig, env_index: int) -> int:
    """Seed of an environment; independent of sample sizes and learners."""
    return derive_seed(config.master_seed, env_index, Stage.ENVIRONMENT)


def run_single(
    config: ExperimentConfig,
    env_index: int,
    size_index: int,
    learners: Optional[Sequence[Tuple[str, LearnerSpec]]] = None,
) -> List[CellRecord]:
    """
    Run one cell of the two-stage protocol.

    Args:
        config (ExperimentConfig): Experiment settings
        env_index (int): Environment number; fixes env_seed
        size_index (int): Position in config.sample_sizes; fixes n
        learners (Sequence[Tuple[str, LearnerSpec]], optional): Labelled
            learners to compare, defaults to those of config's scenario

    Returns:
        List[CellRecord]: One record per learner plus the Oracle reference

    Raises:
        DegenerateEnvironmentError: Tagged with the environment seed
    """
    learners = learners if learners is not None else labelled_specs(config)
    env_seed = environment_seed(config, env_index)
    n = config.sample_sizes[size_index]
    seed, idx = config.master_seed, size_index

    env = generate_environment(env_seed, config.env)
    try:
        oracle_value = normalized_value(env, GreedyPolicy(env))
    except DegenerateEnvironmentError as e:
        raise e.with_seed(env_seed) from e

    uniform = UniformPolicy(env.n_contexts, env.n_actions)
    first_data = collect_dataset(env, uniform, n, stage_rng(seed, env_index, Stage.FIRST_COLLECT, idx))
    first_kind = config.first_stage_kind(env_index)
    first_fit = fit_learner(
        config.learner_spec(LearnerEntry(first_kind)),
        first_data,
        uniform,
        stage_rng(seed, env_index, Stage.FIRST_FIT, idx),
        split_holdout(first_data, config.holdout_fraction, stage_rng(seed, env_index, Stage.FIRST_SPLIT, idx)),
    )
    logging_policy = EpsilonGreedyPolicy(first_fit.model, config.epsilon)

    data = collect_dataset(env, logging_policy, n, stage_rng(seed, env_index, Stage.SECOND_COLLECT, idx))
    split = split_holdout(data, config.holdout_fraction, stage_rng(seed, env_index, Stage.SECOND_SPLIT, idx))

    records = [
        CellRecord(env_seed, n, ORACLE_LABEL, oracle_value, None, "", True, first_kind.value, env_index)
    ]
    for k, (label, spec) in enumerate(learners):
        fit = fit_learner(spec, data, logging_policy, stage_rng(seed, env_index, Stage.LEARNER + k, idx), split)
        extra = ""
        if spec.kind is LearnerKind.LS_IPS:
            softmax_value = normalized_value(env, fit.softmax_policy)
            logged_value = ips_estimate(data, fit.policy)
            extra = f"ls_lambda={fit.ls_lambda!r};softmax_value={softmax_value!r};ips_estimate={logged_value!r}"
        if not fit.converged:
            logger.warning(f"{label} did not converge (env_seed={env_seed}, n={n})")
        records.append(CellRecord(
            env_seed, n, label, normalized_value(env, fit.policy), fit.l2, extra, fit.converged,
            first_kind.value, env_index,
        ))

    summary = ", ".join(f"{r.learner}={r.normalized_reward:.4f}" for r in records)
    logger.info(f"Cell env={env_index} n={n} done: {summary}")
    return records


def run_experiment(config: ExperimentConfig, parallelism: Optional[int] = None) -> ExperimentResult:
    """
    Run every (environment, sample size) cell of the configured scenario.

    Cells that fail are recorded and the run continues.

    Args:
        config (ExperimentConfig): Experiment settings
        parallelism (int, optional): Worker processes, defaults to config.parallelism

    Returns:
        ExperimentResult: Records in canonical order plus failures
    """
    coordinator = ExperimentCoordinator(config, run_single)
    return coordinator.execute_all(parallelism or config.parallelism)


def run_feature_subset(
    config: ExperimentConfig, parallelism: Optional[int] = None, require_hidden: bool = True
) -> ExperimentResult:
    """
    Feature-subset confounding study: DM and CSI-expect with full and subset
    features, all trained on data logged by a full-feature first-stage model.

    Args:
        config (ExperimentConfig): Experiment settings; subset_mask selects
            the visible bits
        parallelism (int, optional): Worker processes
        require_hidden (bool): Refuse a mask that hides no bit the oracle uses;
            pass False for control runs where both arms should agree

    Returns:
        ExperimentResult: Records for DM-full, DM-subset, CSI-subset, CSI-full

    Raises:
        PreconditionError: If require_hidden and no hidden bit affects the reward
    """
    hidden = [i for i in range(config.env.n_context_bits) if not config.subset_mask[i]]
    if not hidden or set(hidden) <= set(config.env.inactive_context_bits):
        if require_hidden:
            raise PreconditionError(f"subset_mask hides no context bit the oracle uses (hidden: {hidden})")
        logger.info("subset_mask hides no context bit the oracle uses; DM-subset should match DM-full")
    return run_experiment(replace(config, scenario=Scenario.FEATURE_SUBSET), parallelism)
