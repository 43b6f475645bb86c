"""
Experiment Coordinator

This module schedules the (environment, sample size) cells of an experiment,
runs them in-process or on a worker pool, and collects their records.
A failing cell is recorded with its error and the remaining cells still run.
"""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

from src.bench.config import ExperimentConfig
from src.bench.results import CellFailure, CellRecord, ExperimentResult
from src.bench.seeding import Stage, derive_seed

logger = logging.getLogger(__name__)

CellFunction = Callable[[ExperimentConfig, int, int], List[CellRecord]]


class TaskStatus(Enum):
    """Status of a cell in the experiment."""
    PENDING = "pending"
    IN_PROGRESS = "in_progress"
    COMPLETED = "completed"
    FAILED = "failed"


class CellTask:
    """
    One (environment, sample size) cell.

    Attributes:
        task_id (str): Unique task identifier
        env_index (int): Environment number
        size_index (int): Position of the sample size in the config
        status (TaskStatus): Current status
        records (List[CellRecord]): Records once completed
        error (str): Error message if failed
    """

    def __init__(self, task_id: str, env_index: int, size_index: int):
        self.task_id = task_id
        self.env_index = env_index
        self.size_index = size_index
        self.status = TaskStatus.PENDING
        self.records: List[CellRecord] = []
        self.error: Optional[str] = None

    def mark_in_progress(self) -> None:
        self.status = TaskStatus.IN_PROGRESS

    def mark_completed(self, records: List[CellRecord]) -> None:
        self.status = TaskStatus.COMPLETED
        self.records = list(records)

    def mark_failed(self, error: str) -> None:
        self.status = TaskStatus.FAILED
        self.error = error

    def __repr__(self) -> str:
        return f"CellTask({self.task_id}, env={self.env_index}, size={self.size_index}, {self.status.value})"


class ExperimentCoordinator:
    """
    Runs every cell of an experiment.

    Args:
        config (ExperimentConfig): Experiment settings
        cell_fn (CellFunction): Runs one cell; must be a module-level
            function so it can be shipped to worker processes
    """

    def __init__(self, config: ExperimentConfig, cell_fn: CellFunction):
        self.config = config
        self.cell_fn = cell_fn
        self.logger = logging.getLogger(f"{__name__}.ExperimentCoordinator")
        self.tasks: Dict[str, CellTask] = {}

        for env_index in range(config.n_environments):
            for size_index in range(len(config.sample_sizes)):
                task_id = f"env{env_index:04d}_size{size_index}"
                self.tasks[task_id] = CellTask(task_id, env_index, size_index)

        self.logger.info(f"Experiment coordinator initialized with {len(self.tasks)} cells")

    def _fail(self, task: CellTask, error: BaseException) -> None:
        error_msg = f"{type(error).__name__}: {error}"
        task.mark_failed(error_msg)
        self.logger.error(f"Failed {task}: {error_msg}")

    def execute_task(self, task_id: str) -> List[CellRecord]:
        """
        Run a single cell in this process.

        Raises:
            ValueError: If the task doesn't exist
        """
        if task_id not in self.tasks:
            raise ValueError(f"Task '{task_id}' not found")
        task = self.tasks[task_id]
        task.mark_in_progress()
        self.logger.debug(f"Executing {task}")
        try:
            task.mark_completed(self.cell_fn(self.config, task.env_index, task.size_index))
        except Exception as e:
            self._fail(task, e)
        return task.records

    def execute_all(self, parallelism: int = 1) -> ExperimentResult:
        """
        Run every pending cell.

        Args:
            parallelism (int): Number of worker processes; 1 runs in-process

        Returns:
            ExperimentResult: Records in canonical order plus failures
        """
        pending = [t for t in self.tasks.values() if t.status == TaskStatus.PENDING]
        self.logger.info(f"Running {len(pending)} cells with parallelism {parallelism}")

        if parallelism <= 1:
            for task in pending:
                self.execute_task(task.task_id)
        else:
            with ProcessPoolExecutor(max_workers=parallelism) as pool:
                futures = {}
                for task in pending:
                    task.mark_in_progress()
                    futures[pool.submit(self.cell_fn, self.config, task.env_index, task.size_index)] = task
                for future in as_completed(futures):
                    task = futures[future]
                    try:
                        task.mark_completed(future.result())
                    except Exception as e:
                        self._fail(task, e)

        return self.result()

    def result(self) -> ExperimentResult:
        """Collect completed records and failures into an ExperimentResult."""
        records: List[CellRecord] = []
        failures: List[CellFailure] = []
        for task in self.tasks.values():
            if task.status == TaskStatus.COMPLETED:
                records.extend(task.records)
            elif task.status == TaskStatus.FAILED:
                failures.append(CellFailure(
                    task.env_index,
                    derive_seed(self.config.master_seed, task.env_index, Stage.ENVIRONMENT),
                    self.config.sample_sizes[task.size_index],
                    task.error or "",
                ))
        return ExperimentResult(self.config, records, failures)

    def get_task_status(self, task_id: str) -> Dict[str, Any]:
        """
        Get the status of a cell.

        Raises:
            ValueError: If the task doesn't exist
        """
        if task_id not in self.tasks:
            raise ValueError(f"Task '{task_id}' not found")
        task = self.tasks[task_id]
        return {
            "task_id": task.task_id,
            "env_index": task.env_index,
            "n_samples": self.config.sample_sizes[task.size_index],
            "status": task.status.value,
            "records": len(task.records),
            "error": task.error,
        }

    def get_workflow_summary(self) -> Dict[str, Any]:
        """Task counts per status."""
        return {
            "total_tasks": len(self.tasks),
            "status_counts": {
                status.value: sum(1 for t in self.tasks.values() if t.status == status)
                for status in TaskStatus
            },
        }

    def __repr__(self) -> str:
        return f"ExperimentCoordinator(tasks={len(self.tasks)})"
