"""
Exact enumeration of every (action, outcome) path on tiny horizons.

Each branch advances the real policy and estimator, so the weighted
averages are the exact mean and MSE of the final estimate.
"""
import math
from dataclasses import dataclass
from typing import List, Tuple

from loguru import logger

from src.estimators.a2ipw import EstimatorKind, EstimatorState, estimator_term, finalize
from src.evaluation.metrics import TruthContext, conditional_variance, neyman_loss, regret_step
from src.models.core import DomainError, Environment, OutcomeFamily
from src.policies.base_policy import PolicyState, RewardModel, reward_model, select_allocation

MAX_ENUMERATION_HORIZON = 4


@dataclass(frozen=True)
class EnumerationResult:
    """Exact moments of the final estimate over all branches"""
    ate: float
    mean: float
    mse: float
    expected_variance: float
    expected_regret: float
    branches: int

    @property
    def bias(self) -> float:
        return self.mean - self.ate


def enumerate_outcomes(
    env: Environment,
    policy: PolicyState,
    T: int,
    estimator: EstimatorKind = EstimatorKind.A2IPW,
) -> EnumerationResult:
    """
    Walk all 4^T interaction paths from `policy`.

    expected_variance is (1/T^2) times the expected sum of per-round
    conditional variances, which equals the MSE for any predictable design.
    """
    if env.family is not OutcomeFamily.BERNOULLI:
        raise DomainError("Enumeration requires Bernoulli arms")
    if not (1 <= T <= MAX_ENUMERATION_HORIZON):
        raise DomainError(f"Enumeration horizon must lie in [1, {MAX_ENUMERATION_HORIZON}], got {T}")

    truth = TruthContext.from_environment(env)
    # (probability, estimate, summed conditional variance, summed regret)
    leaves: List[Tuple[float, float, float, float]] = []

    def walk(state: PolicyState, terms: List[float], prob: float, cond_var: float, regret: float):
        if len(terms) == T:
            est = EstimatorState()
            for term in terms:
                est.add(term)
            leaves.append((prob, float(finalize(est)), cond_var, regret))
            return
        pi = float(select_allocation(state))
        model = reward_model(state)
        scoring = RewardModel.zero() if estimator is EstimatorKind.IPW else model
        step_var = float(conditional_variance(pi, scoring, truth))
        step_regret = float(regret_step(neyman_loss(pi, scoring, truth), truth))
        for action, p_action in ((1, pi), (0, 1.0 - pi)):
            mu = env.mean(action)
            for outcome, p_outcome in ((1.0, mu), (0.0, 1.0 - mu)):
                if p_outcome == 0.0:
                    continue
                term = float(estimator_term(estimator, pi, action, outcome, model))
                walk(
                    state.observe(action, outcome),
                    terms + [term],
                    prob * p_action * p_outcome,
                    cond_var + step_var,
                    regret + step_regret,
                )

    walk(policy, [], 1.0, 0.0, 0.0)

    ate = env.ate
    result = EnumerationResult(
        ate=ate,
        mean=math.fsum(p * est for p, est, _, _ in leaves),
        mse=math.fsum(p * (est - ate) ** 2 for p, est, _, _ in leaves),
        expected_variance=math.fsum(p * cv for p, _, cv, _ in leaves) / T ** 2,
        expected_regret=math.fsum(p * r for p, _, _, r in leaves),
        branches=len(leaves),
    )
    logger.debug(
        f"Enumerated {result.branches} branches for {policy.kind.value} on {env.label}, T={T}: "
        f"mse={result.mse:.12g}, bias={result.bias:.3g}"
    )
    return result


def brute_force_mse(env: Environment, policy: PolicyState, T: int) -> float:
    """Exact MSE of the A2IPW estimate by enumeration"""
    return enumerate_outcomes(env, policy, T).mse
