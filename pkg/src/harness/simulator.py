"""
Round-by-round simulation of a batch of independent replications.

Each replication consumes its own pre-drawn uniforms, and every per-round
operation is elementwise, so a replication's results do not depend on which
batch it runs in.
"""
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from loguru import logger

from src.concentration.confidence_sequences import CsParams, stdev_cs_bounds
from src.estimators.a2ipw import EstimatorKind, EstimatorState, estimator_term, finalize
from src.evaluation.metrics import (
    EXPLORATION_TOL,
    RunMetrics,
    TruthContext,
    neyman_loss,
    regret_step,
)
from src.harness.seeding import derive_seed, round_uniforms
from src.models.core import Environment, RoundRecord, Trajectory, outcome_from_uniform
from src.policies.base_policy import (
    PolicyKind,
    PolicyState,
    RewardModel,
    reward_model,
    select_allocation,
)
from src.utils.config import SimulationConfig

OPTIMISM_TOL = 1e-12

TRAJECTORY_FIELDS = ("pi", "action", "outcome", "a2ipw_term", "loss")


class SimulationError(RuntimeError):
    """An internal invariant broke during a replication"""
    pass


@dataclass
class BatchOutcome:
    """Per-replication results of one batch, indexed by position in the batch"""
    estimates: np.ndarray
    sq_errors: np.ndarray
    cum_regret: np.ndarray
    # 0 when the allocation never left 1/2
    exploration_time: np.ndarray
    cs_violations: np.ndarray
    final_allocation_error: np.ndarray
    optimism_violations: np.ndarray
    trajectories: Optional[Dict[str, np.ndarray]] = None

    def __len__(self) -> int:
        return len(self.estimates)

    @classmethod
    def concatenate(cls, parts) -> "BatchOutcome":
        parts = list(parts)
        return cls(
            estimates=np.concatenate([p.estimates for p in parts]),
            sq_errors=np.concatenate([p.sq_errors for p in parts]),
            cum_regret=np.concatenate([p.cum_regret for p in parts]),
            exploration_time=np.concatenate([p.exploration_time for p in parts]),
            cs_violations=np.concatenate([p.cs_violations for p in parts]),
            final_allocation_error=np.concatenate([p.final_allocation_error for p in parts]),
            optimism_violations=np.concatenate([p.optimism_violations for p in parts]),
        )

    def trajectory(self, index: int) -> Trajectory:
        if self.trajectories is None:
            raise SimulationError("Batch was simulated without trajectory recording")
        columns = self.trajectories
        trajectory = Trajectory()
        for t in range(columns["pi"].shape[1]):
            trajectory.append(RoundRecord(
                pi=float(columns["pi"][index, t]),
                action=int(columns["action"][index, t]),
                outcome=float(columns["outcome"][index, t]),
                a2ipw_term=float(columns["a2ipw_term"][index, t]),
                loss=float(columns["loss"][index, t]),
            ))
        return trajectory

    def run_metrics(self, index: int) -> RunMetrics:
        exploration = int(self.exploration_time[index])
        return RunMetrics(
            estimate=float(self.estimates[index]),
            sq_error=float(self.sq_errors[index]),
            cum_regret=float(self.cum_regret[index]),
            exploration_time=exploration if exploration > 0 else None,
            cs_violations=int(self.cs_violations[index]),
            final_allocation_error=float(self.final_allocation_error[index]),
            optimism_violations=int(self.optimism_violations[index]),
            trajectory=self.trajectory(index) if self.trajectories is not None else None,
        )


def simulate_batch(
    env: Environment,
    kind: PolicyKind,
    uniforms: np.ndarray,
    params: CsParams,
    clip_exponent: float = 1.0 / 3.0,
    estimator: EstimatorKind = EstimatorKind.A2IPW,
    record: bool = False,
    label: str = "",
) -> BatchOutcome:
    """
    Run every replication of the batch for uniforms.shape[1] rounds.

    uniforms has shape (batch, horizon, 2); see round_uniforms for the layout.
    """
    batch, horizon, _ = uniforms.shape
    truth = TruthContext.from_environment(env)
    state = PolicyState.initial(kind, params, clip_exponent, env=env, batch_size=batch)
    audit_params = params.per_arm()
    optimism_gap = abs(0.5 - truth.neyman)

    est = EstimatorState.empty(batch)
    cum_regret = np.zeros(batch)
    exploration = np.zeros(batch, dtype=np.int64)
    cs_violations = np.zeros(batch, dtype=np.int64)
    optimism_violations = np.zeros(batch, dtype=np.int64)
    columns = {name: np.zeros((batch, horizon)) for name in TRAJECTORY_FIELDS} if record else None
    pi = np.full(batch, 0.5)

    for t in range(1, horizon + 1):
        pi = np.broadcast_to(np.asarray(select_allocation(state), dtype=float), (batch,))
        if not np.all((pi > 0.0) & (pi < 1.0)):
            bad = int(np.argmax(~((pi > 0.0) & (pi < 1.0))))
            raise SimulationError(f"{label} round {t}: allocation {pi[bad]} outside (0, 1) at batch index {bad}")
        model = reward_model(state)
        scoring = RewardModel.zero() if estimator is EstimatorKind.IPW else model

        # coverage audit uses only data through round t - 1
        covered = np.ones(batch, dtype=bool)
        total = state.observed
        for stats, sigma in ((state.stats0, env.sigma0), (state.stats1, env.sigma1)):
            lo, hi = stdev_cs_bounds(stats, audit_params, total)
            covered &= (lo <= sigma) & (sigma <= hi)
        cs_violations += ~covered
        optimism_violations += np.abs(0.5 - pi) > optimism_gap + OPTIMISM_TOL
        leaving = (exploration == 0) & (np.abs(pi - 0.5) > EXPLORATION_TOL)
        exploration[leaving] = t

        action = (uniforms[:, t - 1, 0] < pi).astype(np.int64)
        outcome = outcome_from_uniform(env, action, uniforms[:, t - 1, 1])
        term = estimator_term(estimator, pi, action, outcome, model)
        if not np.all(np.isfinite(term)):
            raise SimulationError(f"{label} round {t}: non-finite estimator term")
        est.add(term)
        loss = neyman_loss(pi, scoring, truth)
        cum_regret += regret_step(loss, truth)

        if columns is not None:
            columns["pi"][:, t - 1] = pi
            columns["action"][:, t - 1] = action
            columns["outcome"][:, t - 1] = outcome
            columns["a2ipw_term"][:, t - 1] = term
            columns["loss"][:, t - 1] = loss

        state = state.observe_batch(action, outcome)

    if not np.all(np.asarray(state.observed) == horizon):
        raise SimulationError(f"{label}: arm counts do not add up to the horizon {horizon}")

    estimates = np.asarray(finalize(est), dtype=float)
    return BatchOutcome(
        estimates=estimates,
        sq_errors=(estimates - env.ate) ** 2,
        cum_regret=cum_regret,
        exploration_time=exploration,
        cs_violations=cs_violations,
        final_allocation_error=np.abs(pi - truth.neyman),
        optimism_violations=optimism_violations,
        trajectories=columns,
    )


def draw_uniforms(
    config: SimulationConfig,
    instance_idx: int,
    algorithm_idx: int,
    horizon_idx: int,
    start: int,
    stop: int,
) -> np.ndarray:
    """Stacked round uniforms for replications start..stop-1 of one cell"""
    horizon = config.horizons[horizon_idx]
    return np.stack([
        round_uniforms(
            derive_seed(config.master_seed, instance_idx, algorithm_idx, rep, horizon_idx=horizon_idx),
            horizon,
        )
        for rep in range(start, stop)
    ])


def cell_params(config: SimulationConfig) -> CsParams:
    return CsParams(delta=config.delta, boundary_time_mode=config.boundary_time_mode)


def simulate_replications(
    config: SimulationConfig,
    instance_idx: int,
    algorithm_idx: int,
    horizon_idx: int,
    start: int,
    stop: int,
    record: bool = False,
) -> BatchOutcome:
    """Replications start..stop-1 of one grid cell"""
    mu0, mu1 = config.instances[instance_idx]
    env = Environment(mu0, mu1)
    algorithm = config.algorithms[algorithm_idx]
    horizon = config.horizons[horizon_idx]
    label = f"{env.label} {algorithm} T={horizon} reps {start}-{stop - 1}"
    logger.debug(f"Simulating {label}")
    uniforms = draw_uniforms(config, instance_idx, algorithm_idx, horizon_idx, start, stop)
    return simulate_batch(
        env,
        PolicyKind.from_name(algorithm),
        uniforms,
        cell_params(config),
        clip_exponent=config.clip_exponent,
        estimator=config.estimator,
        record=record,
        label=label,
    )


def run_replication(
    config: SimulationConfig,
    instance_idx: int,
    algorithm_idx: int,
    T: int,
    replication_idx: int,
    record: bool = True,
) -> RunMetrics:
    """One replication of one grid cell, with its trajectory when record is set"""
    if T not in config.horizons:
        raise SimulationError(f"Horizon {T} is not part of the config grid {config.horizons}")
    horizon_idx = config.horizons.index(T)
    outcome = simulate_replications(
        config, instance_idx, algorithm_idx, horizon_idx, replication_idx, replication_idx + 1, record=record
    )
    return outcome.run_metrics(0)
