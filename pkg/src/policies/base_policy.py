"""
Shared policy state, the predictable reward model and algorithm dispatch
"""
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, Optional

import numpy as np

from src.concentration.confidence_sequences import CsParams
from src.models.core import (
    ArmStats,
    ArrayLike,
    DomainError,
    Environment,
    update_stats,
    update_stats_masked,
)

# Allocations are kept inside [SAFETY_FLOOR, 1 - SAFETY_FLOOR]
SAFETY_FLOOR = 1e-6

# Reward estimate for an arm without data
DEFAULT_REWARD = 0.5


class PolicyKind(Enum):
    """Allocation rules, valued by their config name"""
    OPTRACK = "optrack"
    CLIP_SMT = "clip_smt"
    CLIP_SDT = "clip_sdt"
    UNIFORM = "uniform"
    ORACLE_EST_REWARD = "oracle_est_reward"
    ORACLE_TRUE_REWARD = "oracle_true_reward"
    # reserved, no implementation ships
    CLIP_OGD = "clip_ogd"

    @classmethod
    def from_name(cls, name: str) -> "PolicyKind":
        try:
            kind = cls(name)
        except ValueError:
            raise DomainError(f"Unknown algorithm: {name}")
        if kind is cls.CLIP_OGD:
            raise DomainError("Algorithm clip_ogd is reserved but not implemented")
        return kind

    @property
    def is_oracle(self) -> bool:
        return self in (PolicyKind.ORACLE_EST_REWARD, PolicyKind.ORACLE_TRUE_REWARD)


IMPLEMENTED_ALGORITHMS = tuple(k.value for k in PolicyKind if k is not PolicyKind.CLIP_OGD)


@dataclass(frozen=True)
class RewardModel:
    """Predictable per-arm mean estimates"""
    r0hat: ArrayLike
    r1hat: ArrayLike

    @classmethod
    def zero(cls) -> "RewardModel":
        return cls(0.0, 0.0)

    def estimate(self, action: ArrayLike) -> ArrayLike:
        return np.where(np.asarray(action) == 1, self.r1hat, self.r0hat)[()]


@dataclass(frozen=True)
class PolicyState:
    """
    Everything a policy knows at the start of a round.

    `round` is the index t of the round about to be played; the arm counts
    always add up to t - 1. Stats may hold scalars or per-replication arrays.
    """
    kind: PolicyKind
    stats0: ArmStats
    stats1: ArmStats
    params: CsParams
    clip_exponent: float = 1.0 / 3.0
    round: int = 1
    env: Optional[Environment] = None

    def __post_init__(self):
        if self.kind.is_oracle and self.env is None:
            raise DomainError(f"{self.kind.value} requires the true environment")
        if not self.kind.is_oracle and self.env is not None:
            raise DomainError(f"{self.kind.value} must not see the true environment")

    @classmethod
    def initial(
        cls,
        kind: PolicyKind,
        params: CsParams,
        clip_exponent: float = 1.0 / 3.0,
        env: Optional[Environment] = None,
        batch_size: Optional[int] = None,
    ) -> "PolicyState":
        return cls(
            kind=kind,
            stats0=ArmStats.empty(batch_size),
            stats1=ArmStats.empty(batch_size),
            params=params,
            clip_exponent=clip_exponent,
            round=1,
            env=env if kind.is_oracle else None,
        )

    def stats(self, action: int) -> ArmStats:
        return self.stats1 if action == 1 else self.stats0

    @property
    def observed(self) -> ArrayLike:
        return (np.asarray(self.stats0.count) + np.asarray(self.stats1.count))[()]

    def observe(self, action: int, outcome: float) -> "PolicyState":
        """State after one round of a single replication"""
        if action == 1:
            return replace(self, stats1=update_stats(self.stats1, outcome), round=self.round + 1)
        return replace(self, stats0=update_stats(self.stats0, outcome), round=self.round + 1)

    def observe_batch(self, action: np.ndarray, outcome: np.ndarray) -> "PolicyState":
        """State after one round of every replication in a batch"""
        treated = action == 1
        return replace(
            self,
            stats0=update_stats_masked(self.stats0, outcome, ~treated),
            stats1=update_stats_masked(self.stats1, outcome, treated),
            round=self.round + 1,
        )


def clamp_allocation(pi: ArrayLike) -> ArrayLike:
    return np.clip(pi, SAFETY_FLOOR, 1.0 - SAFETY_FLOOR)[()]


def reward_model(state: PolicyState) -> RewardModel:
    """Sample means through round t - 1, or the true means for the true-reward oracle"""
    if state.kind is PolicyKind.ORACLE_TRUE_REWARD:
        return RewardModel(state.env.mu0, state.env.mu1)
    r0 = np.where(np.asarray(state.stats0.count) > 0, state.stats0.mean, DEFAULT_REWARD)
    r1 = np.where(np.asarray(state.stats1.count) > 0, state.stats1.mean, DEFAULT_REWARD)
    return RewardModel(r0[()], r1[()])


def uniform_select(state: PolicyState) -> ArrayLike:
    shape = np.shape(state.stats0.count)
    return np.full(shape, 0.5)[()]


@lru_cache(maxsize=None)
def _selectors() -> Dict[PolicyKind, Callable[[PolicyState], ArrayLike]]:
    from src.policies.clipping import clip_select
    from src.policies.optrack import optrack_select
    from src.policies.oracle import oracle_select

    return {
        PolicyKind.OPTRACK: optrack_select,
        PolicyKind.CLIP_SMT: clip_select,
        PolicyKind.CLIP_SDT: clip_select,
        PolicyKind.UNIFORM: uniform_select,
        PolicyKind.ORACLE_EST_REWARD: oracle_select,
        PolicyKind.ORACLE_TRUE_REWARD: oracle_select,
    }


def select_allocation(state: PolicyState) -> ArrayLike:
    """Allocation for the current round, dispatched on the policy kind"""
    selector = _selectors().get(state.kind)
    if selector is None:
        raise DomainError(f"No allocation rule for {state.kind.value}")
    return selector(state)
