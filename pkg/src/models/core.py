"""
Core domain types for two-arm adaptive experiments
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np

ArrayLike = Union[float, int, np.ndarray]

# arm sigmas closer than this count as equal
SIGMA_TIE_TOL = 1e-12


class DomainError(ValueError):
    """Raised when a value falls outside the domain of an operation"""
    pass


class OutcomeFamily(Enum):
    """Outcome distribution family"""
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class Environment:
    """Two-arm environment with [0, 1] outcomes and known moments"""
    mu0: float
    mu1: float
    family: OutcomeFamily = OutcomeFamily.BERNOULLI

    def __post_init__(self):
        for name, value in (("mu0", self.mu0), ("mu1", self.mu1)):
            if not (0.0 <= value <= 1.0):
                raise DomainError(f"{name} must lie in [0, 1], got {value}")

    def mean(self, action: int) -> float:
        return self.mu1 if action == 1 else self.mu0

    def sigma(self, action: int) -> float:
        mu = self.mean(action)
        return math.sqrt(mu * (1.0 - mu))

    @property
    def sigma0(self) -> float:
        return self.sigma(0)

    @property
    def sigma1(self) -> float:
        return self.sigma(1)

    @property
    def ate(self) -> float:
        return self.mu1 - self.mu0

    @property
    def neyman(self) -> float:
        """Neyman allocation; exactly 1/2 when the arm sigmas tie, deterministic arms included"""
        s0, s1 = self.sigma0, self.sigma1
        if self.sigmas_tied:
            return 0.5
        return s1 / (s0 + s1)

    @property
    def sigmas_tied(self) -> bool:
        return abs(self.sigma1 - self.sigma0) <= SIGMA_TIE_TOL

    @property
    def label(self) -> str:
        return f"mu0={self.mu0:g},mu1={self.mu1:g}"


@dataclass(frozen=True)
class Interval:
    """Closed real interval"""
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise DomainError(f"Interval lower end {self.lo} exceeds upper end {self.hi}")

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class ArmStats:
    """
    Online sufficient statistics of one arm.

    Fields hold either Python scalars (a single replication) or numpy arrays
    holding one entry per replication of a batch.
    """
    count: ArrayLike = 0
    mean: ArrayLike = 0.0
    m2: ArrayLike = 0.0

    @classmethod
    def empty(cls, size: Optional[int] = None) -> "ArmStats":
        if size is None:
            return cls()
        return cls(
            count=np.zeros(size, dtype=np.int64),
            mean=np.zeros(size),
            m2=np.zeros(size),
        )

    @property
    def variance(self) -> ArrayLike:
        """Biased (1/N) variance, 0 when the arm is unseen"""
        count = np.asarray(self.count)
        return (np.asarray(self.m2) / np.maximum(count, 1))[()]

    @property
    def stdev(self) -> ArrayLike:
        return np.sqrt(self.variance)[()]


def welford_step(count, mean, m2, outcome) -> Tuple:
    """One Welford update; works elementwise on scalars or arrays"""
    new_count = count + 1
    delta = outcome - mean
    new_mean = mean + delta / new_count
    new_m2 = m2 + delta * (outcome - new_mean)
    return new_count, new_mean, new_m2


def _check_outcomes(outcome) -> None:
    values = np.asarray(outcome, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values < 0.0) or np.any(values > 1.0):
        raise DomainError(f"Outcome must lie in [0, 1], got {outcome}")


def update_stats(stats: ArmStats, outcome: float) -> ArmStats:
    """Add one outcome to an arm's statistics"""
    _check_outcomes(outcome)
    count, mean, m2 = welford_step(stats.count, stats.mean, stats.m2, float(outcome))
    return ArmStats(count=count, mean=mean, m2=m2)


def update_stats_masked(stats: ArmStats, outcome: np.ndarray, mask: np.ndarray) -> ArmStats:
    """Batch form of update_stats: only entries where mask is set take the new outcome"""
    _check_outcomes(outcome)
    count, mean, m2 = welford_step(stats.count, stats.mean, stats.m2, outcome)
    return ArmStats(
        count=np.where(mask, count, stats.count),
        mean=np.where(mask, mean, stats.mean),
        m2=np.where(mask, m2, stats.m2),
    )


def outcome_from_uniform(env: Environment, action: ArrayLike, uniform: ArrayLike) -> ArrayLike:
    """Map a uniform draw to an outcome of the chosen arm"""
    mu = np.where(np.asarray(action) == 1, env.mu1, env.mu0)
    return (np.asarray(uniform) < mu).astype(float)[()]


def sample_outcome(env: Environment, action: int, rng: np.random.Generator) -> float:
    """Draw one outcome of arm `action`, consuming one uniform from the stream"""
    if action not in (0, 1):
        raise DomainError(f"Action must be 0 or 1, got {action}")
    return float(outcome_from_uniform(env, action, rng.random()))


@dataclass(frozen=True)
class RoundRecord:
    """What happened in one round"""
    pi: float
    action: int
    outcome: float
    a2ipw_term: float
    loss: float


@dataclass
class Trajectory:
    """Per-round history of a completed replication"""
    rounds: List[RoundRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rounds)

    @property
    def allocations(self) -> List[float]:
        return [r.pi for r in self.rounds]

    def append(self, record: RoundRecord) -> None:
        if not (0.0 < record.pi < 1.0):
            raise DomainError(f"Allocation must lie strictly inside (0, 1), got {record.pi}")
        self.rounds.append(record)
