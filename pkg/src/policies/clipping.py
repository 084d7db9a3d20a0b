"""
Clipped standard-deviation tracking baselines.

Both variants clip the plug-in Neyman allocation into [c_t, 1 - c_t] with
c_t = min(1/2, t^-exponent). The clip_sdt variant approximates the published
schedule with the same functional form and its own configurable exponent.
"""
import numpy as np

from src.models.core import ArrayLike
from src.policies.base_policy import PolicyKind, PolicyState


def clip_level(t: int, exponent: float) -> float:
    return min(0.5, float(t) ** (-exponent))


def empirical_neyman(state: PolicyState) -> ArrayLike:
    """Plug-in sigma1 / (sigma0 + sigma1); 1/2 until both arms have two samples"""
    s0 = np.asarray(state.stats0.stdev, dtype=float)
    s1 = np.asarray(state.stats1.stdev, dtype=float)
    total = s0 + s1
    ready = (np.asarray(state.stats0.count) >= 2) & (np.asarray(state.stats1.count) >= 2) & (total > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ready, s1 / total, 0.5)[()]


def clip_select(state: PolicyState) -> ArrayLike:
    if state.kind not in (PolicyKind.CLIP_SMT, PolicyKind.CLIP_SDT):
        raise ValueError(f"clip_select called with {state.kind.value}")
    c = clip_level(state.round, state.clip_exponent)
    return np.clip(empirical_neyman(state), c, 1.0 - c)[()]
