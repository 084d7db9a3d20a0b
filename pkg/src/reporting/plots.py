"""
Static SVG figures: normalized MSE against horizon, and the Neyman loss curve
"""
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams.update(
    {
        "font.family": "DejaVu Sans",
        "axes.unicode_minus": False,
        # fixed ids keep the SVG output reproducible
        "svg.hashsalt": "adaptive-ate",
    }
)
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from loguru import logger  # noqa: E402

from src.evaluation.metrics import TruthContext, neyman_loss  # noqa: E402
from src.models.core import Environment  # noqa: E402
from src.policies.base_policy import RewardModel  # noqa: E402
from src.reporting.results_writer import ResultRow, ResultsFormatError  # noqa: E402

# grid over (0, 1) for the loss curve
LOSS_GRID = np.linspace(0.01, 0.99, 981)

# distance from the Neyman allocation marked on the loss curve
LOSS_EPSILON = 0.1


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _instance_slug(mu0: float, mu1: float) -> str:
    return f"mu0_{mu0:g}_mu1_{mu1:g}".replace(".", "p")


def plot_normalized_mse(mu0: float, mu1: float, rows: List[ResultRow], path: Path) -> Path:
    """Normalized MSE against T per algorithm, with +/- 2 SE bands and the V* line"""
    by_algorithm: Dict[str, List[ResultRow]] = {}
    for row in rows:
        by_algorithm.setdefault(row.algorithm, []).append(row)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for algorithm, series in sorted(by_algorithm.items()):
        series = sorted(series, key=lambda r: r.horizon)
        xs = np.array([r.horizon for r in series], dtype=float)
        ys = np.array([r.normalized_mse for r in series])
        se = np.array([r.normalized_mse_se for r in series])
        ax.plot(xs, ys, "o-", linewidth=1.5, markersize=4, label=algorithm)
        ax.fill_between(xs, ys - 2.0 * se, ys + 2.0 * se, alpha=0.2)

    vstar = TruthContext.from_environment(Environment(mu0, mu1)).vstar
    ax.axhline(vstar, color="black", linestyle="--", linewidth=1.0, label="V* = (sigma0 + sigma1)^2")
    ax.set_title(f"Normalized MSE, mu0={mu0:g}, mu1={mu1:g}")
    ax.set_xlabel("T")
    ax.set_ylabel("T * MSE")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def neyman_loss_curve(env: Environment) -> Tuple[np.ndarray, np.ndarray]:
    """Neyman loss at the true means over LOSS_GRID"""
    truth = TruthContext.from_environment(env)
    return LOSS_GRID, np.asarray(neyman_loss(LOSS_GRID, RewardModel(env.mu0, env.mu1), truth))


def plot_neyman_loss(env: Environment, path: Path, epsilon: float = LOSS_EPSILON) -> Path:
    """Loss curve with the Neyman allocation and a symmetric band around it marked"""
    truth = TruthContext.from_environment(env)
    xs, ys = neyman_loss_curve(env)
    exact = RewardModel(env.mu0, env.mu1)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(xs, ys, color="steelblue", linewidth=1.5, label="Neyman loss")
    ax.axvline(truth.neyman, color="black", linestyle="--", linewidth=1.0, label=f"pi* = {truth.neyman:.4g}")
    for offset in (-epsilon, epsilon):
        pi = truth.neyman + offset
        if 0.0 < pi < 1.0:
            value = float(neyman_loss(pi, exact, truth))
            ax.plot([pi], [value], "o", color="indianred")
            ax.annotate(f"pi*{offset:+g}: {value:.4g}", (pi, value), textcoords="offset points", xytext=(4, 6), fontsize=7)
    ax.set_ylim(0.0, max(min(float(np.max(ys)), 4.0 * max(truth.vstar, 0.25)), 0.1))
    ax.set_title(f"Neyman loss, {env.label}")
    ax.set_xlabel("pi")
    ax.set_ylabel("loss")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def emit_plots(
    rows: List[ResultRow],
    out_dir: Union[str, Path],
    loss_instance: Optional[Tuple[float, float]] = None,
) -> List[Path]:
    """
    One normalized-MSE SVG per instance plus one Neyman loss SVG.

    Args:
        rows: Result rows covering at least one instance
        out_dir: Output directory, created if missing
        loss_instance: (mu0, mu1) for the loss curve; defaults to the most asymmetric instance

    Returns:
        Paths written
    """
    if not rows:
        raise ResultsFormatError("No result rows to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    by_instance: Dict[Tuple[float, float], List[ResultRow]] = {}
    for row in rows:
        by_instance.setdefault((row.instance_mu0, row.instance_mu1), []).append(row)

    written = []
    for (mu0, mu1), instance_rows in sorted(by_instance.items()):
        path = out_dir / f"normalized_mse_{_instance_slug(mu0, mu1)}.svg"
        written.append(plot_normalized_mse(mu0, mu1, instance_rows, path))

    if loss_instance is None:
        loss_instance = max(
            sorted(by_instance),
            key=lambda inst: abs(Environment(*inst).neyman - 0.5),
        )
    env = Environment(*loss_instance)
    written.append(plot_neyman_loss(env, out_dir / f"neyman_loss_{_instance_slug(env.mu0, env.mu1)}.svg"))

    logger.info(f"Wrote {len(written)} plots to {out_dir}")
    return written
