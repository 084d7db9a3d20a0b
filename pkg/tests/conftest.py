"""
Shared pytest configuration: the slow acceptance suite only runs with --runslow,
and --update-golden rewrites the committed golden outputs
"""
import pytest

from src.utils.config import SimulationConfig


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow acceptance tests"
    )
    parser.addoption(
        "--update-golden", action="store_true", default=False, help="rewrite the golden result files"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo acceptance checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_config():
    """A grid small enough to simulate inside unit tests"""
    return SimulationConfig(
        instances=((0.5, 0.5), (0.1, 0.5)),
        horizons=(1, 20),
        algorithms=("optrack", "uniform", "oracle_true_reward", "clip_sdt"),
        replications=8,
        master_seed=123,
        batch_size=3,
    )
