"""
Grid execution: every (instance, algorithm, horizon) cell is run as a set of
replication batches and reduced in replication-index order
"""
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from src.evaluation.metrics import TruthContext, exploration_time_bound
from src.harness.simulator import BatchOutcome, simulate_replications
from src.models.core import Environment
from src.policies.base_policy import PolicyKind
from src.utils.config import SimulationConfig


class CellStatus(Enum):
    """Grid cell status enum"""
    PENDING = "pending"
    RUNNING = "running"
    SUCCESS = "success"
    FAILED = "failed"


@dataclass(frozen=True)
class CellKey:
    """Grid coordinates of one cell"""
    instance_idx: int
    algorithm_idx: int
    horizon_idx: int
    mu0: float
    mu1: float
    algorithm: str
    horizon: int

    @classmethod
    def from_config(cls, config: SimulationConfig, instance_idx: int, algorithm_idx: int, horizon_idx: int) -> "CellKey":
        mu0, mu1 = config.instances[instance_idx]
        return cls(
            instance_idx=instance_idx,
            algorithm_idx=algorithm_idx,
            horizon_idx=horizon_idx,
            mu0=mu0,
            mu1=mu1,
            algorithm=config.algorithms[algorithm_idx],
            horizon=config.horizons[horizon_idx],
        )

    @property
    def label(self) -> str:
        return f"mu0={self.mu0},mu1={self.mu1} {self.algorithm} T={self.horizon}"

    @property
    def sort_key(self) -> Tuple[float, float, str, int]:
        return (self.mu0, self.mu1, self.algorithm, self.horizon)


@dataclass
class AggregateMetrics:
    """Monte Carlo summary of one cell"""
    replications: int
    normalized_mse: float
    normalized_mse_se: float
    mean_regret: float
    mean_regret_se: float
    median_exploration_time: float
    cs_violation_rate: float
    wall_time: float
    mean_estimate: float
    mean_estimate_se: float
    normalized_regret: float
    vstar: float
    mean_final_allocation_error: float


@dataclass
class CellResult:
    """Result of running one grid cell"""
    key: CellKey
    status: CellStatus
    start_time: datetime
    end_time: Optional[datetime] = None
    metrics: Optional[AggregateMetrics] = None
    errors: List[str] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def duration_seconds(self) -> Optional[float]:
        """Calculate cell duration in seconds"""
        if self.end_time:
            return (self.end_time - self.start_time).total_seconds()
        return None

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for the run summary"""
        return {
            'mu0': self.key.mu0,
            'mu1': self.key.mu1,
            'algorithm': self.key.algorithm,
            'horizon': self.key.horizon,
            'status': self.status.value,
            'start_time': self.start_time.isoformat(),
            'end_time': self.end_time.isoformat() if self.end_time else None,
            'duration_seconds': self.duration_seconds,
            'metrics': asdict(self.metrics) if self.metrics else None,
            'errors': self.errors,
            'metadata': self.metadata,
        }


def _mean_and_se(values: np.ndarray) -> Tuple[float, float]:
    n = len(values)
    mean = float(np.mean(values))
    if n < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1)) / math.sqrt(n)


def aggregate(key: CellKey, outcome: BatchOutcome, wall_time: float = 0.0) -> AggregateMetrics:
    """
    Reduce per-replication results of a cell, in replication-index order.

    Args:
        key: Cell coordinates
        outcome: Concatenated per-replication arrays
        wall_time: Summed simulation time of the cell's batches

    Returns:
        Cell summary with Monte Carlo standard errors
    """
    T = key.horizon
    truth = TruthContext.from_environment(Environment(key.mu0, key.mu1))
    mse, mse_se = _mean_and_se(outcome.sq_errors)
    regret, regret_se = _mean_and_se(outcome.cum_regret)
    estimate, estimate_se = _mean_and_se(outcome.estimates)
    # runs that never left 1/2 count as infinitely late
    exploration = np.where(outcome.exploration_time > 0, outcome.exploration_time, np.inf)
    return AggregateMetrics(
        replications=len(outcome),
        normalized_mse=T * mse,
        normalized_mse_se=T * mse_se,
        mean_regret=regret,
        mean_regret_se=regret_se,
        median_exploration_time=float(np.median(exploration)),
        cs_violation_rate=float(np.mean(outcome.cs_violations > 0)),
        wall_time=wall_time,
        mean_estimate=estimate,
        mean_estimate_se=estimate_se,
        normalized_regret=T * mse - truth.vstar,
        vstar=truth.vstar,
        mean_final_allocation_error=float(np.mean(outcome.final_allocation_error)),
    )


def _timed_batch(config: SimulationConfig, key: CellKey, start: int, stop: int) -> Tuple[BatchOutcome, float]:
    started = time.time()
    outcome = simulate_replications(config, key.instance_idx, key.algorithm_idx, key.horizon_idx, start, stop)
    return outcome, time.time() - started


def _cell_metadata(config: SimulationConfig, key: CellKey) -> Dict[str, Any]:
    truth = TruthContext.from_environment(Environment(key.mu0, key.mu1))
    metadata: Dict[str, Any] = {
        'neyman_allocation': truth.neyman,
        'vstar': truth.vstar,
        'estimator': config.estimator.value,
        'boundary_time_mode': config.boundary_time_mode.value,
    }
    if key.algorithm == PolicyKind.OPTRACK.value:
        metadata['exploration_time_bound'] = exploration_time_bound(truth, config.delta)
    if key.algorithm == PolicyKind.ORACLE_TRUE_REWARD.value:
        # exact normalized MSE of the fixed Neyman design with exact rewards
        metadata['analytic_normalized_mse'] = truth.vstar
    return metadata


def _log_cell_summary(cell: CellResult, delta: float) -> None:
    logger.info(f"Cell {cell.key.label}: {cell.status.value}")
    if cell.metrics:
        m = cell.metrics
        logger.info(f"  T*MSE: {m.normalized_mse:.6g} +/- {m.normalized_mse_se:.3g} (V*={m.vstar:.6g})")
        logger.info(f"  Mean regret: {m.mean_regret:.6g} +/- {m.mean_regret_se:.3g}")
        logger.info(f"  Median exploration time: {m.median_exploration_time}")
        if cell.key.algorithm == PolicyKind.OPTRACK.value and m.cs_violation_rate > delta:
            logger.warning(f"  CS violation rate {m.cs_violation_rate:.4f} exceeds delta={delta}")
    for error in cell.errors[:5]:
        logger.info(f"    - {error}")


def run_grid(config: SimulationConfig, workers: int = 1) -> List[CellResult]:
    """
    Run every cell of the grid.

    Batches are independent tasks and may finish in any order; each cell is
    reduced from its batches in replication-index order, so results do not
    depend on the worker count. A failing cell is recorded and the grid
    continues.

    Returns:
        Cell results sorted by (mu0, mu1, algorithm, horizon)
    """
    keys = [
        CellKey.from_config(config, i, a, h)
        for i in range(len(config.instances))
        for a in range(len(config.algorithms))
        for h in range(len(config.horizons))
    ]
    starts = list(range(0, config.replications, config.batch_size))
    logger.info(
        f"Running {len(keys)} cells x {config.replications} replications "
        f"in {len(starts)} batches per cell with {workers} worker(s)"
    )

    cells: Dict[CellKey, CellResult] = {}
    for key in keys:
        cells[key] = CellResult(
            key=key,
            status=CellStatus.PENDING,
            start_time=datetime.now(timezone.utc),
            metadata=_cell_metadata(config, key),
        )

    batches: Dict[CellKey, Dict[int, BatchOutcome]] = {key: {} for key in keys}
    wall_times: Dict[CellKey, float] = {key: 0.0 for key in keys}

    def record(key: CellKey, start: int, result: Tuple[BatchOutcome, float]) -> None:
        outcome, elapsed = result
        batches[key][start] = outcome
        wall_times[key] += elapsed

    def fail(key: CellKey, start: int, error: Exception) -> None:
        logger.error(f"Cell {key.label} failed in batch starting at replication {start}: {error}")
        cells[key].errors.append(f"replications from {start}: {error}")

    tasks = [(key, start, min(start + config.batch_size, config.replications)) for key in keys for start in starts]
    for key in keys:
        cells[key].status = CellStatus.RUNNING

    if workers <= 1:
        for key, start, stop in tasks:
            if cells[key].errors:
                continue
            try:
                record(key, start, _timed_batch(config, key, start, stop))
            except Exception as e:
                fail(key, start, e)
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {
                executor.submit(_timed_batch, config, key, start, stop): (key, start)
                for key, start, stop in tasks
            }
            for future in as_completed(futures):
                key, start = futures[future]
                try:
                    record(key, start, future.result())
                except Exception as e:
                    fail(key, start, e)

    for key in keys:
        cell = cells[key]
        if not cell.errors:
            try:
                outcome = BatchOutcome.concatenate(batches[key][start] for start in starts)
                cell.metrics = aggregate(key, outcome, wall_times[key])
                cell.status = CellStatus.SUCCESS
            except Exception as e:
                logger.error(f"Cell {key.label} failed during aggregation: {e}")
                cell.errors.append(str(e))
        if cell.errors:
            cell.status = CellStatus.FAILED
        cell.end_time = datetime.now(timezone.utc)
        _log_cell_summary(cell, config.delta)

    succeeded = sum(1 for cell in cells.values() if cell.status is CellStatus.SUCCESS)
    logger.info(f"Grid finished: {succeeded}/{len(keys)} cells succeeded")
    return sorted(cells.values(), key=lambda cell: cell.key.sort_key)
