"""
Unit tests for seeding, batch simulation, grid execution and the coverage experiment
"""
import numpy as np
import pytest

from src.concentration.confidence_sequences import CsParams
from src.estimators.a2ipw import EstimatorKind
from src.evaluation.metrics import TruthContext, analytic_variance
from src.harness.coverage import coverage_experiment
from src.harness.grid_runner import CellKey, CellStatus, aggregate, run_grid
from src.harness.seeding import derive_seed, round_uniforms
from src.harness.simulator import (
    SimulationError,
    run_replication,
    simulate_batch,
    simulate_replications,
)
from src.models.core import Environment
from src.policies.base_policy import PolicyKind, RewardModel
from src.utils.config import SimulationConfig


class TestSeeding:
    """Test per-replication random streams"""

    def test_same_tuple_same_stream(self):
        """Test determinism of derived streams"""
        a = derive_seed(42, 1, 2, 3).random(100)
        b = derive_seed(42, 1, 2, 3).random(100)
        np.testing.assert_array_equal(a, b)

    def test_replications_differ(self):
        """Test neighbouring replications give different Bernoulli(1/2) sequences"""
        a = derive_seed(42, 0, 0, 0).random(1000) < 0.5
        b = derive_seed(42, 0, 0, 1).random(1000) < 0.5
        assert np.any(a != b)

    def test_horizons_differ(self):
        """Test each horizon has its own stream"""
        a = derive_seed(42, 0, 0, 0, horizon_idx=0).random(10)
        b = derive_seed(42, 0, 0, 0, horizon_idx=1).random(10)
        assert not np.array_equal(a, b)

    def test_round_uniforms_shape(self):
        """Test one action and one outcome uniform per round"""
        assert round_uniforms(derive_seed(1, 0, 0, 0), 7).shape == (7, 2)


class TestSimulateBatch:
    """Test the vectorised round loop"""

    def test_oracle_true_reward_symmetric_has_zero_regret(self):
        """Test the true-reward oracle plays pi* with exact rewards"""
        uniforms = np.random.default_rng(0).random((5, 30, 2))
        outcome = simulate_batch(Environment(0.5, 0.5), PolicyKind.ORACLE_TRUE_REWARD, uniforms, CsParams())
        np.testing.assert_array_equal(outcome.cum_regret, np.zeros(5))

    def test_deterministic_arms_have_zero_regret(self):
        """Test estimated rewards on deterministic arms add no regret"""
        uniforms = np.random.default_rng(5).random((4, 10, 2))
        outcome = simulate_batch(Environment(0.0, 1.0), PolicyKind.OPTRACK, uniforms, CsParams())
        np.testing.assert_array_equal(outcome.cum_regret, np.zeros(4))

    @pytest.mark.parametrize("kind", [PolicyKind.OPTRACK, PolicyKind.CLIP_SDT, PolicyKind.ORACLE_EST_REWARD])
    def test_round_values_ignore_the_current_draw(self, kind):
        """Test changing the round-t draws leaves pi_t and the round-t reward model untouched"""
        env = Environment(0.1, 0.5)
        uniforms = np.random.default_rng(6).random((8, 30, 2))
        changed = uniforms.copy()
        k = 12
        changed[:, k, :] = 1.0 - changed[:, k, :]
        a = simulate_batch(env, kind, uniforms, CsParams(), record=True)
        b = simulate_batch(env, kind, changed, CsParams(), record=True)
        # loss at round k depends only on pi_k and the reward model of round k
        for name in ("pi", "loss"):
            np.testing.assert_array_equal(a.trajectories[name][:, : k + 1], b.trajectories[name][:, : k + 1])

    def test_records_trajectory(self):
        """Test recorded trajectories have one round per step"""
        uniforms = np.random.default_rng(1).random((2, 12, 2))
        outcome = simulate_batch(Environment(0.2, 0.6), PolicyKind.OPTRACK, uniforms, CsParams(), record=True)
        trajectory = outcome.trajectory(1)
        assert len(trajectory) == 12
        assert all(0.0 < pi < 1.0 for pi in trajectory.allocations)
        metrics = outcome.run_metrics(1)
        assert metrics.estimate == pytest.approx(np.mean([r.a2ipw_term for r in trajectory.rounds]))

    def test_without_recording(self):
        """Test asking for a trajectory that was not recorded"""
        uniforms = np.random.default_rng(2).random((1, 3, 2))
        outcome = simulate_batch(Environment(0.2, 0.6), PolicyKind.UNIFORM, uniforms, CsParams())
        assert outcome.run_metrics(0).trajectory is None
        with pytest.raises(SimulationError):
            outcome.trajectory(0)

    def test_batch_composition_does_not_matter(self):
        """Test a replication gives identical values alone or inside a batch"""
        uniforms = np.random.default_rng(3).random((6, 40, 2))
        env = Environment(0.1, 0.5)
        together = simulate_batch(env, PolicyKind.CLIP_SDT, uniforms, CsParams())
        alone = simulate_batch(env, PolicyKind.CLIP_SDT, uniforms[4:5], CsParams())
        assert together.estimates[4] == alone.estimates[0]
        assert together.cum_regret[4] == alone.cum_regret[0]

    def test_ipw_estimator(self):
        """Test IPW terms under the uniform policy"""
        uniforms = np.random.default_rng(4).random((3, 1, 2))
        outcome = simulate_batch(
            Environment(0.0, 1.0), PolicyKind.UNIFORM, uniforms, CsParams(), estimator=EstimatorKind.IPW
        )
        # deterministic arms: treated gives +2, control gives 0
        expected = np.where(uniforms[:, 0, 0] < 0.5, 2.0, 0.0)
        np.testing.assert_array_equal(outcome.estimates, expected)


class TestRunReplication:
    """Test single replications of a grid cell"""

    def test_uniform_single_round(self, small_config):
        """Test uniform policy at T = 1 never leaves 1/2"""
        metrics = run_replication(small_config, 0, 1, 1, 0)
        assert metrics.exploration_time is None
        assert len(metrics.trajectory) == 1

    def test_oracle_true_reward_zero_regret(self, small_config):
        """Test the symmetric true-reward oracle has zero regret"""
        metrics = run_replication(small_config, 0, 2, 20, 5)
        assert metrics.cum_regret == 0.0

    def test_oracle_leaves_half_at_once(self, small_config):
        """Test the oracle on an asymmetric instance explores for zero rounds"""
        assert run_replication(small_config, 1, 2, 20, 0).exploration_time == 1

    def test_matches_batch(self, small_config):
        """Test a single replication equals its entry in a batch"""
        batch = simulate_replications(small_config, 1, 0, 1, 0, 8)
        single = run_replication(small_config, 1, 0, 20, 6, record=False)
        assert single.estimate == batch.estimates[6]
        assert single.sq_error == batch.sq_errors[6]

    def test_unknown_horizon(self, small_config):
        """Test horizons outside the grid"""
        with pytest.raises(SimulationError, match="not part of the config grid"):
            run_replication(small_config, 0, 0, 37, 0)

    def test_optrack_explores_then_tracks(self):
        """Test OPTrack plays 1/2 before the exploration time and moves off it afterwards"""
        config = SimulationConfig(instances=((0.1, 0.5),), horizons=(2000,), algorithms=("optrack",), replications=1)
        metrics = run_replication(config, 0, 0, 2000, 0)
        allocations = metrics.trajectory.allocations
        end = metrics.exploration_time or len(allocations) + 1
        assert all(pi == 0.5 for pi in allocations[: end - 1])
        if end <= len(allocations):
            assert allocations[end - 1] != 0.5
        assert all(0.5 <= pi <= 0.625 + 1e-12 for pi in allocations) or metrics.cs_violations > 0


class TestAggregate:
    """Test the Monte Carlo reduction"""

    def test_single_replication(self, small_config):
        """Test one replication is reported without averaging"""
        key = CellKey.from_config(small_config, 1, 0, 1)
        outcome = simulate_replications(small_config, 1, 0, 1, 0, 1)
        metrics = aggregate(key, outcome)
        single = outcome.run_metrics(0)
        assert metrics.replications == 1
        assert metrics.normalized_mse == 20 * single.sq_error
        assert metrics.normalized_mse_se == 0.0
        assert metrics.mean_regret == single.cum_regret
        assert metrics.vstar == pytest.approx(0.64)

    def test_fixed_design_matches_analytic_variance(self):
        """Test the true-reward oracle normalized MSE against the analytic variance at T = 100"""
        T = 100
        config = SimulationConfig(
            instances=((0.1, 0.5),), horizons=(T,), algorithms=("oracle_true_reward",), replications=4_000
        )
        metrics = run_grid(config)[0].metrics
        env = Environment(0.1, 0.5)
        truth = TruthContext.from_environment(env)
        analytic = analytic_variance([env.neyman] * T, [RewardModel(env.mu0, env.mu1)] * T, truth, T)
        assert abs(metrics.normalized_mse - T * analytic) <= 3 * metrics.normalized_mse_se

    def test_standard_error_shrinks_with_replications(self):
        """Test doubling the replications scales the standard error by about 1/sqrt(2)"""
        base = dict(instances=((0.2, 0.5),), horizons=(50,), algorithms=("uniform",), master_seed=9)
        small = run_grid(SimulationConfig(replications=4_000, **base))[0].metrics
        large = run_grid(SimulationConfig(replications=8_000, **base))[0].metrics
        assert large.mean_estimate_se / small.mean_estimate_se == pytest.approx(2 ** -0.5, rel=0.1)

    def test_never_exploring_median_is_infinite(self, small_config):
        """Test runs that stay at 1/2 count as infinitely late"""
        key = CellKey.from_config(small_config, 0, 1, 1)
        metrics = aggregate(key, simulate_replications(small_config, 0, 1, 1, 0, 4))
        assert metrics.median_exploration_time == float("inf")


class TestRunGrid:
    """Test grid execution"""

    def test_all_cells_succeed(self, small_config):
        """Test every cell is run with the configured replications"""
        cells = run_grid(small_config)
        assert len(cells) == small_config.cell_count
        assert all(cell.status is CellStatus.SUCCESS for cell in cells)
        assert all(cell.metrics.replications == 8 for cell in cells)
        assert all(cell.duration_seconds is not None for cell in cells)
        keys = [cell.key.sort_key for cell in cells]
        assert keys == sorted(keys)

    def test_metadata(self, small_config):
        """Test cells carry the exploration bound and analytic oracle MSE"""
        cells = {(c.key.mu0, c.key.algorithm, c.key.horizon): c for c in run_grid(small_config)}
        assert cells[(0.1, "optrack", 20)].metadata["exploration_time_bound"] > 0
        assert cells[(0.5, "optrack", 20)].metadata["exploration_time_bound"] is None
        assert cells[(0.1, "oracle_true_reward", 20)].metadata["analytic_normalized_mse"] == pytest.approx(0.64)

    def test_worker_count_does_not_change_results(self, small_config):
        """Test one and two workers give identical metrics"""
        serial = run_grid(small_config, workers=1)
        parallel = run_grid(small_config, workers=2)
        for a, b in zip(serial, parallel):
            assert a.key == b.key
            assert a.metrics.normalized_mse == b.metrics.normalized_mse
            assert a.metrics.mean_regret == b.metrics.mean_regret

    def test_failed_cells_are_recorded(self, small_config, mocker):
        """Test a failing batch marks its cell failed and the grid continues"""
        mocker.patch(
            "src.harness.grid_runner.simulate_replications",
            side_effect=SimulationError("round 3: non-finite estimator term"),
        )
        cells = run_grid(small_config)
        assert len(cells) == small_config.cell_count
        assert all(cell.status is CellStatus.FAILED for cell in cells)
        assert "non-finite" in cells[0].errors[0]
        assert cells[0].to_dict()["status"] == "failed"


class TestCoverage:
    """Test the coverage experiment"""

    def test_report(self):
        """Test a small coverage run stays within delta"""
        report = coverage_experiment(0.5, 0.05, 300, 40, master_seed=11)
        assert report.streams == 40
        assert report.violating_streams == len(report.first_violation_times)
        assert all(2 <= t <= 300 for t in report.first_violation_times)
        assert report.within_delta
        assert 0.0 < report.mean_final_width < 0.5

    def test_deterministic(self):
        """Test the same seed reproduces the report"""
        assert coverage_experiment(0.3, 0.1, 50, 10, master_seed=5) == coverage_experiment(0.3, 0.1, 50, 10, master_seed=5)
