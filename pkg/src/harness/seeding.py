"""
Per-replication random streams derived from the master seed
"""
import numpy as np


def derive_seed(
    master_seed: int,
    instance_idx: int,
    algorithm_idx: int,
    replication_idx: int,
    horizon_idx: int = 0,
) -> np.random.Generator:
    """
    Independent PCG64 stream for one grid coordinate.

    SeedSequence hashes the master seed together with the coordinate tuple,
    so a stream depends only on its coordinates, never on scheduling.
    """
    seed_seq = np.random.SeedSequence(
        entropy=master_seed,
        spawn_key=(instance_idx, algorithm_idx, horizon_idx, replication_idx),
    )
    return np.random.Generator(np.random.PCG64(seed_seq))


def round_uniforms(rng: np.random.Generator, horizon: int) -> np.ndarray:
    """
    Uniforms consumed by one replication, shape (horizon, 2).

    Column 0 draws the action and column 1 the outcome, in round order.
    """
    return rng.random((horizon, 2))
