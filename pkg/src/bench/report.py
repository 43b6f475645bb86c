"""
Result Reports

Per-cell CSV output with a fixed column set, and a Markdown summary shaped
like a learner-by-sample-size table of mean normalized reward.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.bench.config import FirstStage, labelled_specs
from src.bench.results import ORACLE_LABEL, CellRecord, ExperimentResult

CSV_COLUMNS = ("env_seed", "n_samples", "learner", "normalized_reward", "l2", "extra_hyper", "converged")
NOT_APPLICABLE = "n/a"


@dataclass(frozen=True)
class AggregateRow:
    """
    Mean normalized reward of one learner at one sample size.

    Attributes:
        learner (str): Learner label
        n_samples (int): Dataset size
        mean (float): Mean over environments
        stderr (float, optional): Standard error of the mean; None with a
            single environment
        count (int): Number of environments
    """

    learner: str
    n_samples: int
    mean: float
    stderr: Optional[float]
    count: int

    def formatted(self, digits: int = 4) -> str:
        se = NOT_APPLICABLE if self.stderr is None else f"{self.stderr:.{digits}f}"
        return f"{self.mean:.{digits}f} ± {se}"


def aggregate(records: Iterable[CellRecord]) -> List[AggregateRow]:
    """
    Mean and standard error over environments per (learner, sample size).

    Returns:
        List[AggregateRow]: Sorted by (learner, n_samples)
    """
    groups: Dict[Tuple[str, int], List[float]] = {}
    for r in records:
        groups.setdefault((r.learner, r.n_samples), []).append(r.normalized_reward)

    rows = []
    for (learner, n), values in sorted(groups.items()):
        v = np.asarray(values, dtype=float)
        stderr = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else None
        rows.append(AggregateRow(learner, n, float(v.mean()), stderr, len(v)))
    return rows


def render_csv(records: Sequence[CellRecord]) -> str:
    """
    One line per record in canonical order. Floats are written with repr so
    the text is identical whenever the values are.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in sorted(records, key=CellRecord.sort_key):
        writer.writerow([
            r.env_seed,
            r.n_samples,
            r.learner,
            repr(float(r.normalized_reward)),
            "" if r.l2 is None else repr(float(r.l2)),
            r.extra_hyper,
            "true" if r.converged else "false",
        ])
    return buf.getvalue()


def format_size(n: int) -> str:
    """10000 -> '10K', 1000000 -> '1M'."""
    if n >= 1_000_000 and n % 1_000_000 == 0:
        return f"{n // 1_000_000}M"
    if n >= 1_000 and n % 1_000 == 0:
        return f"{n // 1_000}K"
    return str(n)


def _table(rows: List[AggregateRow], learners: Sequence[str], sizes: Sequence[int]) -> List[str]:
    cells = {(row.learner, row.n_samples): row for row in rows}
    lines = [
        "| Learner | " + " | ".join(format_size(n) for n in sizes) + " |",
        "|---" * (len(sizes) + 1) + "|",
    ]
    for learner in learners:
        values = [cells[(learner, n)].formatted() if (learner, n) in cells else "-" for n in sizes]
        lines.append(f"| {learner} | " + " | ".join(values) + " |")
    return lines


def _learner_order(result: ExperimentResult) -> List[str]:
    order = [ORACLE_LABEL] + [label for label, _ in labelled_specs(result.config)]
    seen = {r.learner for r in result.records}
    return [label for label in dict.fromkeys(order) if label in seen] + sorted(seen - set(order))


def render_markdown(result: ExperimentResult) -> str:
    """
    Summary table of mean ± standard error, a per-first-stage breakdown when
    logging models alternate, and the list of failed cells.
    """
    config = result.config
    sizes = sorted({r.n_samples for r in result.records} | set(config.sample_sizes))
    learners = _learner_order(result)
    envs = len({r.env_seed for r in result.records})

    lines = [
        "# Mean normalized reward",
        "",
        f"{envs} environments, epsilon {config.epsilon}, master seed {config.master_seed}, "
        f"scenario {config.scenario.value}.",
        "",
    ]
    lines += _table(aggregate(result.records), learners, sizes)

    if config.first_stage_learner is FirstStage.ALTERNATE:
        for stage in sorted({r.first_stage for r in result.records}):
            subset = [r for r in result.records if r.first_stage == stage]
            lines += ["", f"## Logged by {stage}", ""]
            lines += _table(aggregate(subset), learners, sizes)

    if result.failures:
        lines += ["", "## Failed cells", ""]
        for f in result.failures:
            lines.append(f"- env {f.env_index} (seed {f.env_seed}), n={f.n_samples}: {f.error}")

    return "\n".join(lines) + "\n"
