"""
Result Workspace

Where the bench writes its result tables, config snapshots and logs.
Relative paths resolve against a base directory (BENCH_OUTPUT_DIR by default);
absolute paths are used as given.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, List, Optional

from src.bench.config import env_output_dir

logger = logging.getLogger(__name__)


class ResultWorkspace:
    """
    File operations rooted at an output directory.

    Args:
        base_dir (str, optional): Base directory, defaults to BENCH_OUTPUT_DIR
            or the current directory
    """

    def __init__(self, base_dir: Optional[str] = None):
        self.base_dir = os.path.abspath(base_dir or env_output_dir() or ".")
        self.logger = logging.getLogger(f"{__name__}.ResultWorkspace")

    def resolve(self, path: str) -> Path:
        """Absolute path for path, relative ones placed under base_dir."""
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def write_text(self, path: str, content: str) -> Path:
        """
        Write a text file, creating parent directories as needed.

        Returns:
            Path: Full path to the written file
        """
        file_path = self.resolve(path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        file_path.write_text(content, encoding="utf-8")
        self.logger.debug(f"Wrote file: {file_path}")
        return file_path

    def write_json(self, path: str, payload: Any) -> Path:
        return self.write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def read_text(self, path: str) -> str:
        """
        Raises:
            FileNotFoundError: If the file doesn't exist
        """
        file_path = self.resolve(path)
        if not file_path.exists():
            raise FileNotFoundError(f"File not found: {file_path}")
        return file_path.read_text(encoding="utf-8")

    def list_files(self, pattern: str = "*") -> List[str]:
        """Files under base_dir matching a glob pattern, relative and sorted."""
        base = Path(self.base_dir)
        if not base.exists():
            return []
        return sorted(str(p.relative_to(base)) for p in base.rglob(pattern) if p.is_file())

    def __repr__(self) -> str:
        return f"ResultWorkspace(base_dir={self.base_dir})"
