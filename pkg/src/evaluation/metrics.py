"""
Environment-aware metrics: Neyman loss, regret, exploration time and the
analytic variance of the A2IPW estimator under fixed designs
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.concentration.confidence_sequences import boundary
from src.models.core import SIGMA_TIE_TOL, ArrayLike, DomainError, Environment, Trajectory
from src.policies.base_policy import RewardModel

# |pi - 1/2| above this counts as leaving the exploration phase
EXPLORATION_TOL = 1e-12


@dataclass(frozen=True)
class TruthContext:
    """Ground-truth quantities derived from the environment"""
    env: Environment
    vstar: float
    neyman: float
    sigma_gap: float

    @classmethod
    def from_environment(cls, env: Environment) -> "TruthContext":
        s0, s1 = env.sigma0, env.sigma1
        neyman = env.neyman
        vstar = (s0 + s1) ** 2
        if s0 > 0.0 and s1 > 0.0:
            fixed_design = s1 ** 2 / neyman + s0 ** 2 / (1.0 - neyman)
            if abs(fixed_design - vstar) > 1e-12 * max(1.0, vstar):
                raise DomainError(
                    f"Optimal variance mismatch for {env.label}: {fixed_design} vs {vstar}"
                )
        sigma_gap = 0.0 if env.sigmas_tied else s1 - s0
        return cls(env=env, vstar=vstar, neyman=neyman, sigma_gap=sigma_gap)

    @property
    def deterministic(self) -> bool:
        """Both arms have zero variance"""
        return self.env.sigma0 == 0.0 and self.env.sigma1 == 0.0

    @property
    def variances(self):
        return self.env.sigma0 ** 2, self.env.sigma1 ** 2


@dataclass
class RunMetrics:
    """Outcome of one replication"""
    estimate: float
    sq_error: float
    cum_regret: float
    exploration_time: Optional[int]
    cs_violations: int
    final_allocation_error: float = 0.0
    optimism_violations: int = 0
    trajectory: Optional[Trajectory] = None


def _reward_errors(model: RewardModel, truth: TruthContext):
    eps0 = truth.env.mu0 - np.asarray(model.r0hat, dtype=float)
    eps1 = truth.env.mu1 - np.asarray(model.r1hat, dtype=float)
    return eps0, eps1


def neyman_loss(pi: ArrayLike, model: RewardModel, truth: TruthContext) -> ArrayLike:
    """Sum over arms of sigma^2 / pi(a) + (1 - pi(a)) / pi(a) * eps(a)^2"""
    p1 = np.asarray(pi, dtype=float)
    p0 = 1.0 - p1
    var0, var1 = truth.variances
    eps0, eps1 = _reward_errors(model, truth)
    loss = var1 / p1 + (1.0 - p1) / p1 * eps1 ** 2 + var0 / p0 + (1.0 - p0) / p0 * eps0 ** 2
    return loss[()]


def conditional_variance(pi: ArrayLike, model: RewardModel, truth: TruthContext) -> ArrayLike:
    """Exact variance of one A2IPW term given the allocation and reward model"""
    eps0, eps1 = _reward_errors(model, truth)
    return (neyman_loss(pi, model, truth) + 2.0 * eps0 * eps1)[()]


def regret_step(loss: ArrayLike, truth: TruthContext) -> ArrayLike:
    """Loss above V*; zero on deterministic instances, where every design is optimal"""
    loss = np.asarray(loss, dtype=float)
    if truth.deterministic:
        return np.zeros_like(loss)[()]
    return (loss - truth.vstar)[()]


def detect_exploration_end(trajectory: Trajectory) -> Optional[int]:
    """First 1-based round whose allocation differs from 1/2"""
    for t, record in enumerate(trajectory.rounds, start=1):
        if abs(record.pi - 0.5) > EXPLORATION_TOL:
            return t
    return None


def analytic_variance(
    policy_sequence: Sequence[float],
    model_sequence: Sequence[RewardModel],
    truth: TruthContext,
    T: int,
) -> float:
    """
    Variance of the final estimate for a non-adaptive design.

    The allocations and reward models must be fixed in advance; adaptive
    policies need the enumeration oracle instead.
    """
    if len(policy_sequence) != T or len(model_sequence) != T:
        raise DomainError(
            f"Expected {T} allocations and models, got {len(policy_sequence)} and {len(model_sequence)}"
        )
    total = math.fsum(
        float(conditional_variance(pi, model, truth))
        for pi, model in zip(policy_sequence, model_sequence)
    )
    return total / T ** 2


def exploration_time_bound(truth: TruthContext, delta: float) -> Optional[int]:
    """Smallest t with t > 64 / gap^2 * boundary(t, delta); None when the sigmas tie"""
    gap = abs(truth.sigma_gap)
    if gap <= SIGMA_TIE_TOL:
        return None
    scale = 64.0 / gap ** 2

    def done(t: int) -> bool:
        return t > scale * boundary(t, delta)

    hi = 2
    while not done(hi):
        hi *= 2
    if hi == 2:
        return hi
    lo = hi // 2
    # done(lo) is False, done(hi) is True
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if done(mid):
            hi = mid
        else:
            lo = mid
    return hi
