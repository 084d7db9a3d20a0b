"""
Oracles that play the true Neyman allocation
"""
import numpy as np

from src.models.core import ArrayLike
from src.policies.base_policy import PolicyState, clamp_allocation


def oracle_select(state: PolicyState) -> ArrayLike:
    if not state.kind.is_oracle:
        raise ValueError(f"oracle_select called with {state.kind.value}")
    pi_star = clamp_allocation(state.env.neyman)
    return np.full(np.shape(state.stats0.count), pi_star)[()]
