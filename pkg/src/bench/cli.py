"""
Command-line entry point.

    bench run [--config PATH] [--out PATH] [--format csv|markdown]
              [--parallelism N] [--scenario full|feature_subset] [--paper-scale]
    bench env --seed S [--out PATH]
    bench collect --env-seed S --n N --out PATH [--seed R]

Exit codes: 0 on success, 1 on configuration errors, 2 when a cell failed.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import List, Optional

import numpy as np

from src.bench.config import (
    ExperimentConfig,
    OutputFormat,
    Scenario,
    env_log_level,
    env_parallelism,
    load_config,
)
from src.bench.report import render_csv, render_markdown
from src.bench.runner import run_experiment, run_feature_subset
from src.bench.workspace import ResultWorkspace
from src.env.environment import EnvConfig, environment_to_json, generate_environment
from src.errors import BenchError, ConfigurationError
from src.pipeline.collect import collect_dataset
from src.pipeline.logfile import write_log
from src.policy.policies import UniformPolicy

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_CELL_FAILURE = 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=None, help="Overrides BENCH_LOG_LEVEL")

    parser = argparse.ArgumentParser(prog="bench", description="Offline contextual bandit learner benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="Run an experiment and write its results")
    run.add_argument("--config", help="JSON experiment config; defaults are used without it")
    run.add_argument("--out", help="Result file, relative paths go under BENCH_OUTPUT_DIR")
    run.add_argument("--format", choices=[f.value for f in OutputFormat])
    run.add_argument("--parallelism", type=int)
    run.add_argument("--scenario", choices=[s.value for s in Scenario])
    run.add_argument(
        "--paper-scale", "--full-scale", dest="full_scale", action="store_true",
        help="100 environments, sizes 10K/100K/500K"
    )

    env = sub.add_parser("env", parents=[common], help="Generate an environment and print or save it as JSON")
    env.add_argument("--seed", type=int, required=True)
    env.add_argument("--out")

    collect = sub.add_parser("collect", parents=[common], help="Log samples from an environment under the uniform policy")
    collect.add_argument("--env-seed", type=int, required=True)
    collect.add_argument("--n", type=int, required=True)
    collect.add_argument("--out", required=True)
    collect.add_argument("--seed", type=int, default=0, help="Seed of the sampling stream")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config document (or defaults) with command-line overrides applied."""
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.out:
        overrides["output"] = args.out
    if args.format:
        overrides["output_format"] = OutputFormat(args.format)
    if args.scenario:
        overrides["scenario"] = Scenario(args.scenario)
    parallelism = args.parallelism or env_parallelism()
    if parallelism is not None:
        overrides["parallelism"] = parallelism
    if overrides:
        config = replace(config, **overrides)
    if args.full_scale:
        config = config.with_full_scale()
    config.validate()
    return config


def cmd_run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    workspace = ResultWorkspace()

    if config.scenario is Scenario.FEATURE_SUBSET:
        result = run_feature_subset(config)
    else:
        result = run_experiment(config)

    if config.output_format is OutputFormat.MARKDOWN:
        content = render_markdown(result)
    else:
        content = render_csv(result.records)
    path = workspace.write_text(config.output, content)
    workspace.write_json(f"{config.output}.config.json", config.to_dict())
    logger.info(f"Wrote {len(result.records)} records to {path}")

    if result.failures:
        for f in result.failures:
            logger.error(f"Cell env={f.env_index} n={f.n_samples} failed: {f.error}")
        return EXIT_CELL_FAILURE
    return EXIT_OK


def cmd_env(args: argparse.Namespace) -> int:
    doc = environment_to_json(generate_environment(args.seed, EnvConfig()))
    if args.out:
        path = ResultWorkspace().write_json(args.out, doc)
        logger.info(f"Wrote environment {args.seed} to {path}")
    else:
        print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_collect(args: argparse.Namespace) -> int:
    env = generate_environment(args.env_seed, EnvConfig())
    data = collect_dataset(env, UniformPolicy(env.n_contexts, env.n_actions), args.n, np.random.default_rng(args.seed))
    path = write_log(ResultWorkspace().resolve(args.out), data)
    logger.info(f"Wrote {len(data)} samples ({len(data.positives)} positives) to {path}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "env": cmd_env, "collect": cmd_collect}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # --help exits with 0; any parse error is a configuration error
        return EXIT_OK if not e.code else EXIT_CONFIG_ERROR
    logging.basicConfig(
        level=(args.log_level or env_log_level()).upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except BenchError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
