"""
Time-uniform empirical-Bernstein confidence sequences for arm standard
deviations, and the confidence sequence they induce on the Neyman allocation
"""
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from src.models.core import ArmStats, ArrayLike, DomainError, Interval

# Largest standard deviation of a [0, 1] variable
MAX_STDEV = 0.5


class BoundaryTimeMode(Enum):
    """Which time index feeds the boundary"""
    ARM_COUNT = "arm_count"
    TOTAL_TIME = "total_time"


@dataclass(frozen=True)
class CsParams:
    """Confidence level and constants of the stdev confidence sequence"""
    delta: float = 0.05
    lower_c: float = 1.7
    upper_c: float = 4.2
    boundary_time_mode: BoundaryTimeMode = BoundaryTimeMode.ARM_COUNT
    # number of good-event components sharing delta
    split: int = 5

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.split < 1:
            raise DomainError(f"split must be positive, got {self.split}")

    @property
    def per_arm_delta(self) -> float:
        return self.delta / self.split

    def per_arm(self) -> "CsParams":
        """Params with delta divided across the good-event components"""
        return CsParams(
            delta=self.per_arm_delta,
            lower_c=self.lower_c,
            upper_c=self.upper_c,
            boundary_time_mode=self.boundary_time_mode,
            split=1,
        )


def boundary(n: int, delta: float) -> float:
    """ln ln(2n) + 0.72 ln(5.2 / delta), valid for n >= 2"""
    if n < 2:
        raise DomainError(f"boundary requires n >= 2, got {n}")
    if not (0.0 < delta < 1.0):
        raise DomainError(f"boundary requires delta in (0, 1), got {delta}")
    return math.log(math.log(2.0 * n)) + 0.72 * math.log(5.2 / delta)


@lru_cache(maxsize=64)
def _boundary_table(delta: float, size: int) -> np.ndarray:
    table = np.zeros(size)
    for n in range(2, size):
        table[n] = boundary(n, delta)
    table.setflags(write=False)
    return table


def boundary_values(n: ArrayLike, delta: float) -> ArrayLike:
    """
    Boundary evaluated at max(n, 2), elementwise.

    Array lookups go through a cached table filled by `boundary`, so scalar
    and batch evaluation agree bit for bit.
    """
    n_arr = np.maximum(np.asarray(n, dtype=np.int64), 2)
    if n_arr.ndim == 0:
        return boundary(int(n_arr), delta)
    largest = int(n_arr.max()) if n_arr.size else 2
    size = 1 << max(largest + 1, 16).bit_length()
    return _boundary_table(delta, size)[n_arr]


def stdev_cs_bounds(
    stats: ArmStats,
    params: CsParams,
    total_count: Optional[ArrayLike] = None,
) -> Tuple[ArrayLike, ArrayLike]:
    """Elementwise (lo, hi) of the stdev confidence sequence"""
    count = np.asarray(stats.count)
    if params.boundary_time_mode is BoundaryTimeMode.TOTAL_TIME and total_count is not None:
        time_index = total_count
    else:
        time_index = count
    ell = boundary_values(time_index, params.delta)
    width = np.sqrt(ell / np.maximum(count, 1))
    sigma_hat = np.sqrt(np.asarray(stats.m2) / np.maximum(count, 1))
    lo = np.maximum(0.0, sigma_hat - params.lower_c * width)
    hi = np.minimum(MAX_STDEV, sigma_hat + params.upper_c * width)
    seen = count >= 2
    lo = np.where(seen, lo, 0.0)
    hi = np.where(seen, hi, MAX_STDEV)
    return lo[()], hi[()]


def stdev_cs(stats: ArmStats, params: CsParams, total_count: Optional[int] = None) -> Interval:
    """Confidence interval for one arm's standard deviation at the current time"""
    lo, hi = stdev_cs_bounds(stats, params, total_count)
    return Interval(float(lo), float(hi))


def neyman_cs_bounds(lo0, hi0, lo1, hi1) -> Tuple[ArrayLike, ArrayLike]:
    """Elementwise (lo, hi) of the Neyman allocation confidence sequence"""
    lo0, hi0, lo1, hi1 = (np.asarray(x, dtype=float) for x in (lo0, hi0, lo1, hi1))
    den_lo = hi0 + lo1
    den_hi = lo0 + hi1
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(den_lo > 0.0, lo1 / den_lo, 0.0)
        hi = np.where(den_hi > 0.0, hi1 / den_hi, 1.0)
    return lo[()], hi[()]


def neyman_cs(cs0: Interval, cs1: Interval) -> Interval:
    """Confidence interval for sigma1 / (sigma0 + sigma1) from per-arm stdev intervals"""
    lo, hi = neyman_cs_bounds(cs0.lo, cs0.hi, cs1.lo, cs1.hi)
    return Interval(float(lo), float(hi))
