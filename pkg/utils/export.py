"""
Export utilities
Tabular output (CSV with full round-trip precision), JSON reports and the
run manifest written by every CLI subcommand
"""

import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from config.settings import APP_VERSION, CSV_FLOAT_FORMAT, MANIFEST_NAME

logger = logging.getLogger(__name__)


def _json_default(obj: Any):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def write_csv(frame: pd.DataFrame, path: str) -> str:
    """
    Write a table with 17 significant digits

    Args:
        frame: Table to write
        path: Destination file

    Returns:
        The path written
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(payload: Dict, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, default=_json_default)
    return path


def norm_table_frame(trajectory, energy=None) -> pd.DataFrame:
    """
    Plot-ready norm table of a trajectory

    Args:
        trajectory: Trajectory from the nonlinear solver
        energy: Optional EnergyFunctional; adds the M column

    Returns:
        DataFrame with t, per-field norm columns, source-term norms and M
    """
    frame = trajectory.frame()
    if energy is not None:
        frame["M"] = energy.values
    return frame


class RunManifest(BaseModel):
    """Record of one CLI invocation: what ran, with which inputs, and what it wrote."""

    subcommand: str
    config: Dict[str, Any] = Field(default_factory=dict)
    tool_version: str = APP_VERSION
    seed: Optional[int] = None
    started_at: str = Field(default_factory=lambda: datetime.now().isoformat())
    wall_time: float = 0.0
    outputs: List[str] = Field(default_factory=list)
    status: str = "running"
    exit_code: Optional[int] = None
    error: Optional[str] = None

    def record_output(self, path: str) -> str:
        self.outputs.append(path)
        return path

    def finish(self, exit_code: int, wall_time: float, error: Optional[str] = None):
        self.exit_code = exit_code
        self.wall_time = wall_time
        self.error = error
        self.status = {0: "passed", 1: "failed"}.get(exit_code, "error")

    def write(self, out_dir: str) -> Optional[str]:
        """
        Save the manifest as JSON in out_dir

        Returns:
            Path written, or None if the file could not be written
        """
        path = os.path.join(out_dir, MANIFEST_NAME)
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(path, "w") as f:
                json.dump(self.model_dump(mode="json"), f, indent=2, default=_json_default)
            return path
        except OSError as e:
            logger.error(f"Error saving run manifest: {e}")
            return None
