"""
Command-line entry points: run a simulation grid, plot results, run the CS
coverage experiment and the exact enumeration check
"""
import argparse
import sys
import time
from pathlib import Path
from typing import List, Optional, Tuple

from loguru import logger

from src.concentration.confidence_sequences import CsParams
from src.estimators.a2ipw import EstimatorKind
from src.evaluation.enumeration import MAX_ENUMERATION_HORIZON, enumerate_outcomes
from src.evaluation.metrics import TruthContext, analytic_variance
from src.harness.coverage import COVERAGE_MASTER_SEED, coverage_experiment
from src.harness.grid_runner import CellStatus, run_grid
from src.models.core import DomainError, Environment
from src.policies.base_policy import IMPLEMENTED_ALGORITHMS, PolicyKind, PolicyState, RewardModel, select_allocation
from src.reporting.plots import emit_plots
from src.reporting.results_writer import (
    ResultsFormatError,
    frame_to_rows,
    read_results,
    rows_from_cells,
    write_results,
    write_run_summary,
)
from src.utils.config import ConfigError, SimulationConfig, configure_logging, dump_config

RESULTS_FILE = "results.csv"
SUMMARY_FILE = "run_summary.jsonl"
CONFIG_DUMP_FILE = "effective_config.env"

# agreement required between enumeration and analytic moments
ORACLE_CHECK_TOL = 1e-12


def _instance(value: str) -> Tuple[float, float]:
    try:
        mu0, mu1 = (float(x) for x in value.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected mu0:mu1, got '{value}'")
    return mu0, mu1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optrack-sim",
        description="Adaptive ATE estimation simulations: OPTrack, clipping baselines and Neyman oracles",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Log level (default: INFO)"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run a simulation grid from a config file")
    run.add_argument("config", type=Path, help="Config file (key=value format)")
    run.add_argument("--out", type=Path, required=True, help="Output directory")
    run.add_argument("--workers", type=int, default=1, help="Worker processes (default: 1)")
    run.add_argument(
        "--full-fidelity",
        action="store_true",
        help="Use the full replication count regardless of the config"
    )
    run.add_argument(
        "--dump-config",
        action="store_true",
        help="Write the effective config next to the results"
    )

    plot = subparsers.add_parser("plot", help="Render SVG plots from a results CSV")
    plot.add_argument("results", type=Path, help="Results CSV written by 'run'")
    plot.add_argument("--out", type=Path, required=True, help="Output directory")
    plot.add_argument(
        "--loss-instance",
        type=_instance,
        help="Instance mu0:mu1 for the Neyman loss curve (default: most asymmetric)"
    )

    coverage = subparsers.add_parser("coverage", help="Stdev confidence sequence coverage experiment")
    coverage.add_argument("mu", type=float, help="Bernoulli mean of every stream")
    coverage.add_argument("delta", type=float, help="Confidence level")
    coverage.add_argument("T", type=int, help="Stream length")
    coverage.add_argument("streams", type=int, help="Number of independent streams")
    coverage.add_argument("--seed", type=int, default=COVERAGE_MASTER_SEED, help="Master seed")

    oracle = subparsers.add_parser("oracle-check", help="Exact enumeration against analytic moments")
    oracle.add_argument("mu0", type=float, help="Control mean")
    oracle.add_argument("mu1", type=float, help="Treatment mean")
    oracle.add_argument("T", type=int, help=f"Horizon, at most {MAX_ENUMERATION_HORIZON}")
    oracle.add_argument("--delta", type=float, default=0.05, help="CS confidence level (default: 0.05)")
    return parser


def cmd_run(args) -> int:
    config = SimulationConfig.from_file(args.config)
    if args.full_fidelity:
        config = config.with_full_fidelity()
        logger.info(f"Full fidelity: {config.replications} replications per cell")

    args.out.mkdir(parents=True, exist_ok=True)
    if args.dump_config:
        dump_config(config, args.out / CONFIG_DUMP_FILE)

    start = time.time()
    cells = run_grid(config, workers=args.workers)
    duration = time.time() - start

    write_run_summary(cells, args.out / SUMMARY_FILE)
    rows = rows_from_cells(cells)
    if rows:
        write_results(rows, args.out / RESULTS_FILE)

    succeeded = sum(1 for cell in cells if cell.status is CellStatus.SUCCESS)
    logger.info(f"\n{'='*60}")
    logger.info(f"Run completed in {duration:.1f}s: {succeeded}/{len(cells)} cells succeeded")
    logger.info(f"{'='*60}")
    if succeeded == len(cells):
        return 0
    if succeeded > 0:
        logger.warning("Some cells failed, see the run summary")
        return 1
    logger.error("All cells failed")
    return 2


def cmd_plot(args) -> int:
    rows = frame_to_rows(read_results(args.results))
    emit_plots(rows, args.out, loss_instance=args.loss_instance)
    return 0


def cmd_coverage(args) -> int:
    report = coverage_experiment(args.mu, args.delta, args.T, args.streams, master_seed=args.seed)
    if report.first_violation_times:
        shown = ", ".join(str(t) for t in report.first_violation_times[:10])
        logger.info(f"First violation times: {shown}")
    if not report.within_delta:
        logger.error(f"Violation rate {report.violation_rate:.4f} exceeds delta {args.delta}")
        return 1
    return 0


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= ORACLE_CHECK_TOL * max(1.0, abs(a), abs(b))


def oracle_check(mu0: float, mu1: float, T: int, delta: float = 0.05) -> List[dict]:
    """
    Enumerate every implemented policy on a tiny horizon.

    Each report holds the exact mean and MSE, the expected summed conditional
    variance, and for fixed designs the analytic variance.
    """
    env = Environment(mu0, mu1)
    truth = TruthContext.from_environment(env)
    params = CsParams(delta=delta)
    reports = []
    for name in IMPLEMENTED_ALGORITHMS:
        kind = PolicyKind.from_name(name)
        policy = PolicyState.initial(kind, params, env=env)
        result = enumerate_outcomes(env, policy, T, EstimatorKind.A2IPW)
        report = {
            'algorithm': name,
            'mean': result.mean,
            'ate': result.ate,
            'mse': result.mse,
            'expected_variance': result.expected_variance,
            'analytic_variance': None,
        }
        if kind is PolicyKind.ORACLE_TRUE_REWARD:
            pi = float(select_allocation(policy))
            model = RewardModel(env.mu0, env.mu1)
            report['analytic_variance'] = analytic_variance([pi] * T, [model] * T, truth, T)
        report['passed'] = (
            _close(result.mean, result.ate)
            and _close(result.mse, result.expected_variance)
            and (report['analytic_variance'] is None or _close(result.mse, report['analytic_variance']))
        )
        reports.append(report)
    return reports


def cmd_oracle_check(args) -> int:
    start = time.time()
    reports = oracle_check(args.mu0, args.mu1, args.T, args.delta)
    for r in reports:
        analytic = "-" if r['analytic_variance'] is None else f"{r['analytic_variance']:.17g}"
        logger.info(
            f"{r['algorithm']:<20} mean={r['mean']:.17g} ate={r['ate']:.17g} "
            f"mse={r['mse']:.17g} expected_var={r['expected_variance']:.17g} analytic={analytic} "
            f"{'ok' if r['passed'] else 'MISMATCH'}"
        )
    logger.info(f"Oracle check finished in {time.time() - start:.3f}s")
    return 0 if all(r['passed'] for r in reports) else 1


COMMANDS = {
    "run": cmd_run,
    "plot": cmd_plot,
    "coverage": cmd_coverage,
    "oracle-check": cmd_oracle_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main execution function"""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError, ResultsFormatError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 2


def cli() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli()
