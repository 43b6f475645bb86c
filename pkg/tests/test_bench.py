"""Tests for the experiment harness: seeding, config, runner, coordinator, reports and CLI."""

import json
from dataclasses import replace

import numpy as np
import pytest

from src.bench.cli import EXIT_CELL_FAILURE, EXIT_CONFIG_ERROR, EXIT_OK, build_parser, main, resolve_config
from src.bench.config import (
    ExperimentConfig,
    FirstStage,
    LearnerEntry,
    OutputFormat,
    Scenario,
    env_parallelism,
    labelled_specs,
    load_config,
)
from src.bench.coordinator import ExperimentCoordinator, TaskStatus
from src.bench.report import CSV_COLUMNS, aggregate, format_size, render_csv, render_markdown
from src.bench.results import ORACLE_LABEL, CellRecord, ExperimentResult
from src.bench.runner import environment_seed, run_experiment, run_feature_subset, run_single
from src.bench.seeding import Stage, derive_seed, splitmix64, stage_rng
from src.bench.workspace import ResultWorkspace
from src.env.environment import EnvConfig, environment_to_json, generate_environment
from src.errors import ConfigurationError, PreconditionError
from src.learners.spec import LearnerKind
from src.pipeline.logfile import read_log

TINY = ExperimentConfig(n_environments=1, sample_sizes=(1_000,))


def _record(env_seed, n, learner, value, first_stage="dm"):
    return CellRecord(env_seed, n, learner, value, None, "", True, first_stage)


def _fail_odd_environments(config, env_index, size_index):
    if env_index % 2:
        raise RuntimeError(f"boom {env_index}")
    n = config.sample_sizes[size_index]
    return [_record(environment_seed(config, env_index), n, "DM", 0.5)]


class TestSeeding:
    def test_splitmix64_reference_value(self):
        # first output of the reference generator seeded with 0
        assert splitmix64(0) == 0xE220A8397B1DCDAF

    def test_deterministic(self):
        assert derive_seed(7, 3, Stage.FIRST_COLLECT, 1) == derive_seed(7, 3, Stage.FIRST_COLLECT, 1)

    def test_every_input_changes_the_seed(self):
        base = derive_seed(7, 3, Stage.FIRST_COLLECT, 1)
        assert derive_seed(8, 3, Stage.FIRST_COLLECT, 1) != base
        assert derive_seed(7, 4, Stage.FIRST_COLLECT, 1) != base
        assert derive_seed(7, 3, Stage.SECOND_COLLECT, 1) != base
        assert derive_seed(7, 3, Stage.FIRST_COLLECT, 2) != base

    def test_stages_are_distinct(self):
        seeds = {derive_seed(0, 0, stage) for stage in Stage}
        assert len(seeds) == len(Stage)
        assert 0 <= min(seeds) and max(seeds) < 2 ** 64

    def test_stage_rng(self):
        a = stage_rng(1, 2, Stage.LEARNER + 1).random(5)
        b = stage_rng(1, 2, Stage.LEARNER + 1).random(5)
        assert np.array_equal(a, b)

    def test_environment_seed_ignores_sample_sizes(self):
        other = replace(TINY, sample_sizes=(500, 2_000, 9_000))
        assert environment_seed(TINY, 3) == environment_seed(other, 3)


class TestConfig:
    def test_defaults_are_valid(self):
        ExperimentConfig().validate()

    @pytest.mark.parametrize("overrides", [
        {"n_environments": 0},
        {"sample_sizes": (50,)},
        {"sample_sizes": ()},
        {"epsilon": 0.0},
        {"epsilon": 1.5},
        {"holdout_fraction": 1.0},
        {"learners": ()},
        {"parallelism": 0},
        {"l2_grid": ()},
        {"subset_mask": (True,) * 3},
        {"master_seed": -1},
        {"max_iters": 0},
    ])
    def test_invalid_fields(self, overrides):
        with pytest.raises(ConfigurationError):
            replace(ExperimentConfig(), **overrides).validate()

    def test_dict_round_trip(self):
        config = replace(
            ExperimentConfig(),
            master_seed=42,
            learners=(LearnerEntry(LearnerKind.DM, l2=0.1), LearnerEntry(LearnerKind.LS_IPS, ls_lambda=1.0)),
            output_format=OutputFormat.MARKDOWN,
            first_stage_learner=FirstStage.CSI_EXPECT,
        )
        doc = json.loads(json.dumps(config.to_dict()))
        assert ExperimentConfig.from_dict(doc) == config

    def test_unknown_keys(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"n_envs": 3})
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"learners": [{"kind": "dm", "alpha": 1}]})
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"learners": ["ips"]})
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"scenario": "ablation"})

    def test_load_config(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"n_environments": 2, "sample_sizes": [200], "learners": ["dm", "csi_expect"]}))
        config = load_config(path)
        assert config.n_environments == 2 and config.sample_sizes == (200,)
        assert [e.kind for e in config.learners] == [LearnerKind.DM, LearnerKind.CSI_EXPECT]

    def test_load_config_errors(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigurationError):
            load_config(bad)
        listing = tmp_path / "list.json"
        listing.write_text("[1, 2]")
        with pytest.raises(ConfigurationError):
            load_config(listing)

    def test_learner_specs(self):
        config = replace(TINY, learners=(LearnerEntry(LearnerKind.DM, l2=0.5), LearnerEntry(LearnerKind.LS_IPS)))
        (dm_label, dm), (ls_label, ls) = labelled_specs(config)
        assert (dm_label, ls_label) == ("DM", "LS-IPS")
        assert dm.train_cfg.l2 == 0.5 and dm.l2_grid == ()
        assert ls.lambda_grid == config.lambda_grid

    def test_feature_subset_labels(self):
        config = replace(TINY, scenario=Scenario.FEATURE_SUBSET)
        labels = [label for label, _ in labelled_specs(config)]
        assert labels == ["DM-full", "DM-subset", "CSI-subset", "CSI-full"]

    def test_first_stage_alternates(self):
        assert TINY.first_stage_kind(0) is LearnerKind.DM
        assert TINY.first_stage_kind(1) is LearnerKind.CSI_EXPECT
        assert replace(TINY, first_stage_learner=FirstStage.DM).first_stage_kind(1) is LearnerKind.DM

    def test_full_scale(self):
        config = TINY.with_full_scale()
        assert config.n_environments == 100
        assert config.sample_sizes == (10_000, 100_000, 500_000)

    def test_env_parallelism(self, monkeypatch):
        monkeypatch.delenv("BENCH_PARALLELISM", raising=False)
        assert env_parallelism() is None
        monkeypatch.setenv("BENCH_PARALLELISM", "4")
        assert env_parallelism() == 4
        monkeypatch.setenv("BENCH_PARALLELISM", "many")
        with pytest.raises(ConfigurationError):
            env_parallelism()


class TestRunner:
    def test_single_cell(self):
        records = run_single(TINY, 0, 0)
        labels = [r.learner for r in records]
        assert labels == [ORACLE_LABEL, "DM", "CSI-sampling", "CSI-expect", "LS-IPS"]
        oracle = records[0]
        assert oracle.normalized_reward == pytest.approx(1.0, abs=1e-12)
        for r in records:
            assert -1e-12 <= r.normalized_reward <= 1.0 + 1e-12
            assert r.env_seed == environment_seed(TINY, 0) and r.n_samples == 1_000
            assert r.first_stage == "dm"
        by_label = {r.learner: r for r in records}
        assert by_label["DM"].l2 in TINY.l2_grid
        assert by_label["LS-IPS"].l2 is None
        extra = dict(item.split("=") for item in by_label["LS-IPS"].extra_hyper.split(";"))
        assert set(extra) == {"ls_lambda", "softmax_value", "ips_estimate"}
        assert float(extra["ls_lambda"]) in TINY.lambda_grid
        assert 0.0 <= float(extra["ips_estimate"]) <= 32 / TINY.epsilon

    def test_same_config_same_csv(self):
        config = replace(TINY, learners=(LearnerEntry(LearnerKind.DM), LearnerEntry(LearnerKind.CSI_SAMPLING)))
        first = render_csv(run_experiment(config).records)
        second = render_csv(run_experiment(config).records)
        assert first == second

    def test_learner_list_does_not_change_other_learners(self):
        dm_only = replace(TINY, learners=(LearnerEntry(LearnerKind.DM),))
        both = replace(TINY, learners=(LearnerEntry(LearnerKind.DM), LearnerEntry(LearnerKind.CSI_EXPECT)))
        dm_a = [r for r in run_single(dm_only, 0, 0) if r.learner == "DM"]
        dm_b = [r for r in run_single(both, 0, 0) if r.learner == "DM"]
        assert dm_a == dm_b

    def test_subset_with_full_mask_matches_full_features(self):
        config = replace(TINY, subset_mask=(True,) * 12)
        result = run_feature_subset(config, require_hidden=False)
        assert not result.failures
        values = {r.learner: r.normalized_reward for r in result.records}
        assert values["DM-subset"] == values["DM-full"]
        assert values["CSI-subset"] == values["CSI-full"]

    @pytest.mark.parametrize("mask, inactive", [
        ((True,) * 12, ()),
        ((False, False) + (True,) * 10, (0, 1)),
    ])
    def test_subset_must_hide_a_used_bit(self, mask, inactive):
        config = replace(TINY, subset_mask=mask, env=EnvConfig(inactive_context_bits=inactive))
        with pytest.raises(PreconditionError):
            run_feature_subset(config)


class TestCoordinator:
    def test_failures_are_recorded_and_the_run_continues(self):
        config = replace(TINY, n_environments=4, sample_sizes=(100, 200))
        coordinator = ExperimentCoordinator(config, _fail_odd_environments)
        result = coordinator.execute_all()
        assert len(result.records) == 4
        assert len(result.failures) == 4
        assert {f.env_index for f in result.failures} == {1, 3}
        assert all("RuntimeError: boom" in f.error for f in result.failures)
        summary = coordinator.get_workflow_summary()
        assert summary["status_counts"]["failed"] == 4
        assert summary["status_counts"]["completed"] == 4

    def test_task_status(self):
        coordinator = ExperimentCoordinator(TINY, _fail_odd_environments)
        status = coordinator.get_task_status("env0000_size0")
        assert status["status"] == TaskStatus.PENDING.value
        assert status["n_samples"] == 1_000
        with pytest.raises(ValueError):
            coordinator.get_task_status("env9999_size0")

    def test_records_are_canonically_ordered(self):
        config = replace(TINY, n_environments=6)
        result = ExperimentCoordinator(config, _fail_odd_environments).execute_all()
        keys = [r.sort_key() for r in result.records]
        assert keys == sorted(keys)


class TestReport:
    def test_aggregate(self):
        records = [_record(1, 100, "DM", 0.2), _record(2, 100, "DM", 0.4), _record(1, 100, "CSI-expect", 0.9)]
        rows = {(r.learner, r.n_samples): r for r in aggregate(records)}
        dm = rows[("DM", 100)]
        assert dm.mean == pytest.approx(0.3)
        assert dm.stderr == pytest.approx(np.std([0.2, 0.4], ddof=1) / np.sqrt(2))
        assert rows[("CSI-expect", 100)].stderr is None
        assert rows[("CSI-expect", 100)].formatted() == "0.9000 ± n/a"

    def test_csv(self):
        records = [
            CellRecord(5, 100, "LS-IPS", 0.25, None, "ls_lambda=0.1", False, "dm"),
            CellRecord(5, 100, "DM", 0.5, 0.01, "", True, "dm"),
        ]
        lines = render_csv(records).splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1] == "5,100,DM,0.5,0.01,,true"
        assert lines[2] == "5,100,LS-IPS,0.25,,ls_lambda=0.1,false"

    def test_format_size(self):
        assert format_size(10_000) == "10K"
        assert format_size(1_000_000) == "1M"
        assert format_size(1_500) == "1500"

    def test_markdown(self):
        config = replace(TINY, sample_sizes=(1_000, 10_000))
        result = ExperimentResult(config, [
            _record(1, 1_000, ORACLE_LABEL, 1.0),
            _record(1, 1_000, "DM", 0.5),
            _record(2, 1_000, "DM", 0.7, first_stage="csi_expect"),
        ])
        text = render_markdown(result)
        assert "| Learner | 1K | 10K |" in text
        assert "| Oracle | 1.0000 ± n/a | - |" in text
        assert "## Logged by dm" in text and "## Logged by csi_expect" in text
        assert text.index("| Oracle") < text.index("| DM")


class TestWorkspace:
    def test_relative_and_absolute_paths(self, tmp_path):
        ws = ResultWorkspace(str(tmp_path))
        path = ws.write_text("nested/out.csv", "a,b\n")
        assert path == tmp_path / "nested" / "out.csv"
        assert ws.read_text("nested/out.csv") == "a,b\n"
        assert ws.resolve(str(tmp_path / "x.json")) == tmp_path / "x.json"
        assert ws.list_files("*.csv") == ["nested/out.csv"]

    def test_json_and_missing(self, tmp_path):
        ws = ResultWorkspace(str(tmp_path))
        ws.write_json("c.json", {"b": 1, "a": 2})
        assert json.loads(ws.read_text("c.json")) == {"a": 2, "b": 1}
        with pytest.raises(FileNotFoundError):
            ws.read_text("nope.txt")

    def test_default_base_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BENCH_OUTPUT_DIR", str(tmp_path))
        assert ResultWorkspace().base_dir == str(tmp_path)


class TestCli:
    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG_ERROR

    def test_invalid_config(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"epsilon": 2.0}))
        assert main(["run", "--config", str(path)]) == EXIT_CONFIG_ERROR

    def test_env_prints_json(self, capsys):
        assert main(["env", "--seed", "3"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc == json.loads(json.dumps(environment_to_json(generate_environment(3))))

    def test_collect(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BENCH_OUTPUT_DIR", str(tmp_path))
        assert main(["collect", "--env-seed", "1", "--n", "200", "--out", "log.csv"]) == EXIT_OK
        assert len(read_log(tmp_path / "log.csv")) == 200

    def test_run_writes_results_and_config(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BENCH_OUTPUT_DIR", str(tmp_path))
        monkeypatch.delenv("BENCH_PARALLELISM", raising=False)
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"n_environments": 1, "sample_sizes": [500], "learners": ["dm"]}))
        code = main(["run", "--config", str(path), "--out", "run.md", "--format", "markdown"])
        assert code == EXIT_OK
        assert (tmp_path / "run.md").read_text().startswith("# Mean normalized reward")
        saved = json.loads((tmp_path / "run.md.config.json").read_text())
        assert saved["output_format"] == "markdown"

    def test_exit_code_constants(self):
        assert (EXIT_OK, EXIT_CONFIG_ERROR, EXIT_CELL_FAILURE) == (0, 1, 2)

    @pytest.mark.parametrize("flag", ["--paper-scale", "--full-scale"])
    def test_paper_scale_flag(self, flag, monkeypatch):
        monkeypatch.delenv("BENCH_PARALLELISM", raising=False)
        config = resolve_config(build_parser().parse_args(["run", flag]))
        assert config.n_environments == 100
        assert config.sample_sizes == (10_000, 100_000, 500_000)

    @pytest.mark.parametrize("argv", [
        ["run", "--parallelism", "abc"],
        ["run", "--format", "xml"],
        ["collect", "--n", "10"],
        [],
    ])
    def test_malformed_arguments_are_config_errors(self, argv):
        assert main(argv) == EXIT_CONFIG_ERROR

    def test_help_exits_ok(self, capsys):
        assert main(["run", "--help"]) == EXIT_OK
        assert "--paper-scale" in capsys.readouterr().out
