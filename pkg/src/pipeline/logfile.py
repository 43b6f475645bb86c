"""
Log File Formats

UTF-8 CSV, header line first, one record per line:

    logs:  context_bits,action_bits,propensity,reward
    CSI:   context_bits,action_bits,propensity,reward,z,weight

A CSI file is a log file with z and weight appended. Its rows come from
positives, so reward is always 1; propensity is pi0(b|x) for the action b on
the row. Bits are written as strings ("0110100"); floats use repr so reading
a file back gives the exact values written.
"""

import csv
import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from src.env.space import Action, Context
from src.errors import ConfigurationError
from src.pipeline.collect import LoggedDataset
from src.pipeline.transform import CsiDataset

logger = logging.getLogger(__name__)

LOG_HEADER = ["context_bits", "action_bits", "propensity", "reward"]
CSI_HEADER = LOG_HEADER + ["z", "weight"]

PathLike = Union[str, Path]


def _bits(index: int, n_bits: int, kind) -> str:
    return str(kind.from_index(int(index), n_bits))


def _read_rows(path: PathLike, header: list) -> List[list]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        found = next(reader, None)
        if found != header:
            raise ConfigurationError(f"{path}: expected header {header}, found {found}")
        rows = [row for row in reader if row]
    if not rows:
        raise ConfigurationError(f"{path}: no records")
    return rows


def _binary(value: str, column: str, line: int, path: PathLike) -> int:
    if value not in ("0", "1"):
        raise ConfigurationError(f"{path}:{line}: {column} must be 0 or 1, got {value!r}")
    return int(value)


def _parse_columns(
    path: PathLike, rows: List[list], width: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, int, int]:
    """Contexts, actions, propensities, rewards and bit lengths of the shared leading columns."""
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ConfigurationError(f"{path}:{i + 2}: expected {width} fields, got {len(row)}")
    nx, na = len(rows[0][0]), len(rows[0][1])
    contexts, actions = np.empty(len(rows), dtype=np.int64), np.empty(len(rows), dtype=np.int64)
    propensities, rewards = np.empty(len(rows)), np.empty(len(rows), dtype=np.int8)
    for i, row in enumerate(rows):
        line = i + 2
        if (len(row[0]), len(row[1])) != (nx, na):
            raise ConfigurationError(
                f"{path}:{line}: bit lengths ({len(row[0])}, {len(row[1])}) differ from the first row ({nx}, {na})"
            )
        try:
            contexts[i] = Context.from_string(row[0]).index
            actions[i] = Action.from_string(row[1]).index
            propensities[i] = float(row[2])
        except ValueError as e:
            raise ConfigurationError(f"{path}:{line}: {e}") from e
        rewards[i] = _binary(row[3], "reward", line, path)
    return contexts, actions, propensities, rewards, nx, na


def write_log(path: PathLike, data: LoggedDataset) -> Path:
    """Write a logged dataset; returns the path written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(LOG_HEADER)
        for x, a, p, y in zip(data.contexts, data.actions, data.propensities, data.rewards):
            writer.writerow([
                _bits(x, data.n_context_bits, Context),
                _bits(a, data.n_action_bits, Action),
                repr(float(p)),
                int(y),
            ])
    logger.info(f"Wrote {len(data)} logged samples to {path}")
    return path


def read_log(path: PathLike) -> LoggedDataset:
    """
    Read a file written by write_log.

    Raises:
        ConfigurationError: On a wrong header, an empty file, a malformed
            field, a reward other than 0/1 or bit lengths that change between rows
        CoverageError: If a propensity is not positive
    """
    rows = _read_rows(path, LOG_HEADER)
    contexts, actions, propensities, rewards, nx, na = _parse_columns(path, rows, len(LOG_HEADER))
    return LoggedDataset(contexts, actions, propensities, rewards, nx, na)


def write_csi(path: PathLike, csi: CsiDataset) -> Path:
    """Write CSI rows; returns the path written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSI_HEADER)
        for x, a, p, z, w in zip(csi.contexts, csi.actions, csi.propensities, csi.targets, csi.weights):
            writer.writerow([
                _bits(x, csi.n_context_bits, Context),
                _bits(a, csi.n_action_bits, Action),
                repr(float(p)),
                1,
                int(z),
                repr(float(w)),
            ])
    logger.info(f"Wrote {len(csi)} CSI rows to {path}")
    return path


def read_csi(path: PathLike) -> CsiDataset:
    """
    Read a file written by write_csi.

    Raises:
        ConfigurationError: On the same problems as read_log, a reward other
            than 1, a z other than 0/1 or a weight that is not positive
    """
    rows = _read_rows(path, CSI_HEADER)
    contexts, actions, propensities, rewards, nx, na = _parse_columns(path, rows, len(CSI_HEADER))
    if (rewards != 1).any():
        raise ConfigurationError(f"{path}: CSI rows must come from positives (reward 1)")
    targets = np.array([_binary(r[4], "z", i + 2, path) for i, r in enumerate(rows)], dtype=np.int8)
    try:
        weights = np.array([float(r[5]) for r in rows])
    except ValueError as e:
        raise ConfigurationError(f"{path}: {e}") from e
    if not (weights > 0).all():
        raise ConfigurationError(f"{path}: CSI weights must be positive")
    return CsiDataset(contexts, actions, targets, weights, nx, na, propensities)
