"""
CSV result table and JSONL run summary
"""
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, List, Union

import pandas as pd
from loguru import logger

from src.harness.grid_runner import CellResult, CellStatus

FLOAT_FORMAT = "%.17g"


class ResultsFormatError(ValueError):
    """Raised when a results table is empty or lacks required columns"""
    pass


@dataclass(frozen=True)
class ResultRow:
    """One CSV row per (instance, algorithm, horizon) cell"""
    instance_mu0: float
    instance_mu1: float
    algorithm: str
    horizon: int
    replications: int
    normalized_mse: float
    normalized_mse_se: float
    mean_regret: float
    mean_regret_se: float
    median_exploration_time: float
    cs_violation_rate: float
    mean_estimate: float
    mean_estimate_se: float
    normalized_regret: float
    vstar: float
    mean_final_allocation_error: float

    @classmethod
    def from_cell(cls, cell: CellResult) -> "ResultRow":
        m = cell.metrics
        return cls(
            instance_mu0=cell.key.mu0,
            instance_mu1=cell.key.mu1,
            algorithm=cell.key.algorithm,
            horizon=cell.key.horizon,
            replications=m.replications,
            normalized_mse=m.normalized_mse,
            normalized_mse_se=m.normalized_mse_se,
            mean_regret=m.mean_regret,
            mean_regret_se=m.mean_regret_se,
            median_exploration_time=m.median_exploration_time,
            cs_violation_rate=m.cs_violation_rate,
            mean_estimate=m.mean_estimate,
            mean_estimate_se=m.mean_estimate_se,
            normalized_regret=m.normalized_regret,
            vstar=m.vstar,
            mean_final_allocation_error=m.mean_final_allocation_error,
        )


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]


def rows_from_cells(cells: Iterable[CellResult]) -> List[ResultRow]:
    """Rows for the cells that succeeded"""
    return [ResultRow.from_cell(cell) for cell in cells if cell.status is CellStatus.SUCCESS]


def rows_to_frame(rows: Iterable[ResultRow]) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(row) for row in rows], columns=RESULT_COLUMNS)
    return frame.sort_values(
        ["instance_mu0", "instance_mu1", "algorithm", "horizon"], kind="mergesort"
    ).reset_index(drop=True)


def write_results(rows: List[ResultRow], path: Union[str, Path]) -> Path:
    """
    Write result rows as CSV.

    Floats carry 17 significant digits so reruns are byte-identical.

    Returns:
        Path written
    """
    if not rows:
        raise ResultsFormatError("No result rows to write")
    path = Path(path)
    frame = rows_to_frame(rows)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(
            path,
            index=False,
            float_format=FLOAT_FORMAT,
            lineterminator="\n",
            encoding="utf-8",
        )
    except OSError as e:
        raise OSError(f"Failed to write results to {path}: {e}") from e
    logger.info(f"Wrote {len(frame)} result rows to {path}")
    return path


def read_results(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except OSError as e:
        raise OSError(f"Failed to read results from {path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise ResultsFormatError(f"{path} is empty") from e
    missing = [c for c in RESULT_COLUMNS[:11] if c not in frame.columns]
    if missing:
        raise ResultsFormatError(f"{path} is missing result columns: {missing}")
    if frame.empty:
        raise ResultsFormatError(f"{path} has no result rows")
    return frame


def frame_to_rows(frame: pd.DataFrame) -> List[ResultRow]:
    rows = []
    for record in frame.to_dict(orient="records"):
        values = {name: record.get(name, float("nan")) for name in RESULT_COLUMNS}
        values["algorithm"] = str(values["algorithm"])
        values["horizon"] = int(values["horizon"])
        values["replications"] = int(values["replications"])
        rows.append(ResultRow(**values))
    return rows


def write_run_summary(cells: Iterable[CellResult], path: Union[str, Path]) -> Path:
    """One JSON object per cell, failures included"""
    path = Path(path)
    cells = list(cells)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for cell in cells:
                f.write(json.dumps(cell.to_dict()) + "\n")
    except OSError as e:
        raise OSError(f"Failed to write run summary to {path}: {e}") from e
    logger.info(f"Wrote run summary for {len(cells)} cells to {path}")
    return path
