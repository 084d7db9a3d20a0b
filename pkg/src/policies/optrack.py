"""
Optimistic policy tracking: play the allocation closest to 1/2 that the
Neyman allocation confidence sequence still allows
"""
from typing import Tuple

import numpy as np

from src.concentration.confidence_sequences import neyman_cs_bounds, stdev_cs_bounds
from src.models.core import ArrayLike, Interval
from src.policies.base_policy import PolicyKind, PolicyState, clamp_allocation


def allocation_cs_bounds(state: PolicyState) -> Tuple[ArrayLike, ArrayLike]:
    """Neyman allocation CS at the start of the round, before the safety floor"""
    params = state.params.per_arm()
    total = state.observed
    lo0, hi0 = stdev_cs_bounds(state.stats0, params, total)
    lo1, hi1 = stdev_cs_bounds(state.stats1, params, total)
    return neyman_cs_bounds(lo0, hi0, lo1, hi1)


def allocation_cs(state: PolicyState) -> Interval:
    lo, hi = allocation_cs_bounds(state)
    return Interval(float(lo), float(hi))


def closest_to_half(lo: ArrayLike, hi: ArrayLike) -> ArrayLike:
    """Point of [lo, hi] nearest to 1/2"""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return np.where(hi < 0.5, hi, np.where(lo > 0.5, lo, 0.5))[()]


def optrack_select(state: PolicyState) -> ArrayLike:
    if state.kind is not PolicyKind.OPTRACK:
        raise ValueError(f"optrack_select called with {state.kind.value}")
    lo, hi = allocation_cs_bounds(state)
    return closest_to_half(clamp_allocation(lo), clamp_allocation(hi))
