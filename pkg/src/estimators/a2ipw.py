"""
A2IPW and IPW estimators of the average treatment effect
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from src.models.core import ArrayLike, DomainError
from src.policies.base_policy import RewardModel


class EstimatorKind(Enum):
    A2IPW = "a2ipw"
    IPW = "ipw"


def _check_allocation(pi: ArrayLike) -> None:
    values = np.asarray(pi, dtype=float)
    if np.any(~(values > 0.0)) or np.any(~(values < 1.0)):
        raise DomainError(f"Allocation must lie strictly inside (0, 1), got {pi}")


def a2ipw_term(pi: ArrayLike, action: ArrayLike, outcome: ArrayLike, model: RewardModel) -> ArrayLike:
    """Residual reweighted by the propensity of the played arm, plus the plug-in effect"""
    _check_allocation(pi)
    treated = np.asarray(action) == 1
    sign = np.where(treated, 1.0, -1.0)
    propensity = np.where(treated, pi, 1.0 - np.asarray(pi, dtype=float))
    residual = np.asarray(outcome, dtype=float) - model.estimate(action)
    return (sign / propensity * residual + (np.asarray(model.r1hat) - np.asarray(model.r0hat)))[()]


def ipw_term(pi: ArrayLike, action: ArrayLike, outcome: ArrayLike) -> ArrayLike:
    return a2ipw_term(pi, action, outcome, RewardModel.zero())


def estimator_term(
    kind: EstimatorKind,
    pi: ArrayLike,
    action: ArrayLike,
    outcome: ArrayLike,
    model: RewardModel,
) -> ArrayLike:
    if kind is EstimatorKind.IPW:
        return ipw_term(pi, action, outcome)
    return a2ipw_term(pi, action, outcome, model)


@dataclass
class EstimatorState:
    """
    Running sum of per-round terms with Neumaier compensation.

    Works on scalars or on one entry per replication.
    """
    sum_terms: ArrayLike = 0.0
    compensation: ArrayLike = 0.0
    rounds: int = 0

    @classmethod
    def empty(cls, size: Optional[int] = None) -> "EstimatorState":
        if size is None:
            return cls()
        return cls(sum_terms=np.zeros(size), compensation=np.zeros(size))

    def add(self, term: ArrayLike) -> None:
        total = self.sum_terms + term
        big = np.abs(self.sum_terms) >= np.abs(term)
        lost = np.where(big, (self.sum_terms - total) + term, (term - total) + self.sum_terms)
        self.compensation = (self.compensation + lost)[()]
        self.sum_terms = np.asarray(total)[()]
        self.rounds += 1


def finalize(state: EstimatorState) -> ArrayLike:
    """Average of the accumulated terms"""
    if state.rounds == 0:
        raise DomainError("Cannot finalize an estimator with no rounds")
    return np.asarray((state.sum_terms + state.compensation) / state.rounds)[()]
