"""
Coverage experiment for the stdev confidence sequence on Bernoulli streams
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from loguru import logger

from src.concentration.confidence_sequences import CsParams, stdev_cs_bounds
from src.harness.seeding import derive_seed
from src.models.core import ArmStats, DomainError, Environment, update_stats_masked

COVERAGE_MASTER_SEED = 20240521

# streams simulated together
STREAM_CHUNK = 500


@dataclass(frozen=True)
class CoverageReport:
    mu: float
    delta: float
    horizon: int
    streams: int
    violating_streams: int
    # first violating time of each violating stream, in stream order
    first_violation_times: Tuple[int, ...]
    mean_final_width: float

    @property
    def violation_rate(self) -> float:
        return self.violating_streams / self.streams

    @property
    def within_delta(self) -> bool:
        return self.violation_rate <= self.delta


def coverage_experiment(
    mu: float,
    delta: float,
    T: int,
    streams: int,
    master_seed: int = COVERAGE_MASTER_SEED,
) -> CoverageReport:
    """
    Count Bernoulli(mu) streams whose stdev CS misses the true sigma at some t in [2, T].

    Stream i draws from derive_seed(master_seed, 0, 0, i).
    """
    if T < 2:
        raise DomainError(f"Coverage horizon must be at least 2, got {T}")
    if streams < 1:
        raise DomainError(f"Need at least one stream, got {streams}")
    env = Environment(mu, mu)
    sigma = env.sigma0
    params = CsParams(delta=delta)
    logger.info(f"Coverage experiment: {streams} streams of Bernoulli({mu}) for {T} rounds at delta={delta}")

    first_violation = np.zeros(streams, dtype=np.int64)
    widths = np.zeros(streams)
    for start in range(0, streams, STREAM_CHUNK):
        stop = min(start + STREAM_CHUNK, streams)
        uniforms = np.stack([derive_seed(master_seed, 0, 0, i).random(T) for i in range(start, stop)])
        outcomes = (uniforms < mu).astype(float)
        stats = ArmStats.empty(stop - start)
        everyone = np.ones(stop - start, dtype=bool)
        first = np.zeros(stop - start, dtype=np.int64)
        lo = hi = None
        for t in range(1, T + 1):
            stats = update_stats_masked(stats, outcomes[:, t - 1], everyone)
            if t < 2:
                continue
            lo, hi = stdev_cs_bounds(stats, params)
            missed = (first == 0) & ((sigma < lo) | (sigma > hi))
            first[missed] = t
        first_violation[start:stop] = first
        widths[start:stop] = hi - lo
        logger.debug(f"Streams {start}-{stop - 1}: {int(np.count_nonzero(first))} violating")

    violating = first_violation[first_violation > 0]
    report = CoverageReport(
        mu=mu,
        delta=delta,
        horizon=T,
        streams=streams,
        violating_streams=len(violating),
        first_violation_times=tuple(int(t) for t in violating),
        mean_final_width=math.fsum(widths) / streams,
    )
    logger.info(
        f"Coverage: {report.violating_streams}/{streams} streams violated "
        f"(rate {report.violation_rate:.4f}, delta {delta}); mean final width {report.mean_final_width:.4g}"
    )
    return report
