import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from dotenv import dotenv_values
from loguru import logger

from src.concentration.confidence_sequences import BoundaryTimeMode
from src.estimators.a2ipw import EstimatorKind
from src.policies.base_policy import IMPLEMENTED_ALGORITHMS

FULL_FIDELITY_REPLICATIONS = 500_000


class ConfigError(ValueError):
    """Invalid simulation config; the message names the offending key"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


def configure_logging(level: str = "INFO") -> None:
    logger.remove()
    logger.add(sys.stderr, level=level.upper())


@dataclass(frozen=True)
class SimulationConfig:
    instances: Tuple[Tuple[float, float], ...]
    horizons: Tuple[int, ...]
    algorithms: Tuple[str, ...]
    replications: int = 50_000
    delta: float = 0.05
    master_seed: int = 20240521
    boundary_time_mode: BoundaryTimeMode = BoundaryTimeMode.ARM_COUNT
    clip_exponent: float = 1.0 / 3.0
    estimator: EstimatorKind = EstimatorKind.A2IPW
    # replications simulated together in one vectorised batch
    batch_size: int = 1024

    def __post_init__(self):
        if not self.instances:
            raise ConfigError("instances", "at least one instance is required")
        for mu0, mu1 in self.instances:
            if not (0.0 <= mu0 <= 1.0 and 0.0 <= mu1 <= 1.0):
                raise ConfigError("instances", f"means must lie in [0, 1], got {mu0}:{mu1}")
        if not self.horizons:
            raise ConfigError("horizons", "at least one horizon is required")
        if any(T < 1 for T in self.horizons):
            raise ConfigError("horizons", "horizons must be positive")
        if list(self.horizons) != sorted(set(self.horizons)):
            raise ConfigError("horizons", "horizons must be strictly ascending")
        if not self.algorithms:
            raise ConfigError("algorithms", "at least one algorithm is required")
        for name in self.algorithms:
            if name not in IMPLEMENTED_ALGORITHMS:
                raise ConfigError("algorithms", f"unknown algorithm '{name}'")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigError("algorithms", "algorithms must be unique")
        if self.replications < 1:
            raise ConfigError("replications", f"must be >= 1, got {self.replications}")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError("delta", f"must lie in (0, 1), got {self.delta}")
        if not (0 <= self.master_seed < 2 ** 64):
            raise ConfigError("master_seed", "must be a 64-bit unsigned integer")
        if not (self.clip_exponent > 0.0):
            raise ConfigError("clip_exponent", f"must be positive, got {self.clip_exponent}")
        if self.batch_size < 1:
            raise ConfigError("batch_size", f"must be >= 1, got {self.batch_size}")

    @property
    def cell_count(self) -> int:
        return len(self.instances) * len(self.algorithms) * len(self.horizons)

    def with_full_fidelity(self) -> "SimulationConfig":
        return replace(self, replications=FULL_FIDELITY_REPLICATIONS)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SimulationConfig":
        return parse_config(path)


def _split(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _parse_instances(value: str) -> Tuple[Tuple[float, float], ...]:
    instances = []
    for item in _split(value):
        parts = item.split(":")
        if len(parts) != 2:
            raise ConfigError("instances", f"expected mu0:mu1, got '{item}'")
        try:
            instances.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ConfigError("instances", f"non-numeric mean in '{item}'")
    return tuple(instances)


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got '{value}'")


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(key, f"expected a number, got '{value}'")


def _parse_enum(key: str, enum_cls, value: str):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ConfigError(key, f"expected one of {allowed}, got '{value}'")


_PARSERS = {
    "instances": _parse_instances,
    "horizons": lambda v: tuple(_parse_int("horizons", x) for x in _split(v)),
    "algorithms": lambda v: tuple(_split(v)),
    "replications": lambda v: _parse_int("replications", v),
    "delta": lambda v: _parse_float("delta", v),
    "master_seed": lambda v: _parse_int("master_seed", v),
    "boundary_time_mode": lambda v: _parse_enum("boundary_time_mode", BoundaryTimeMode, v),
    "clip_exponent": lambda v: _parse_float("clip_exponent", v),
    "estimator": lambda v: _parse_enum("estimator", EstimatorKind, v),
    "batch_size": lambda v: _parse_int("batch_size", v),
}

_REQUIRED = ("instances", "horizons", "algorithms")


def parse_config(path: Union[str, Path]) -> SimulationConfig:
    """
    Parse a flat key=value config file.

    Lists are comma separated and an instance is written mu0:mu1. The process
    environment is never consulted.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("path", f"config file not found: {path}")

    raw: Dict[str, Optional[str]] = dotenv_values(path, interpolate=False)
    unknown = [key for key in raw if key not in _PARSERS]
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(key, "missing required key")

    values = {}
    for key, value in raw.items():
        if value is None:
            raise ConfigError(key, "missing value")
        values[key] = _PARSERS[key](value.strip())

    config = SimulationConfig(**values)
    logger.info(
        f"Loaded config {path}: {len(config.instances)} instances x {len(config.algorithms)} "
        f"algorithms x {len(config.horizons)} horizons, {config.replications} replications"
    )
    return config


def dump_config(config: SimulationConfig, path: Optional[Union[str, Path]] = None) -> str:
    """Render a config in the file format; parse_config reads it back unchanged"""
    lines = [
        "instances=" + ",".join(f"{mu0!r}:{mu1!r}" for mu0, mu1 in config.instances),
        "horizons=" + ",".join(str(T) for T in config.horizons),
        "algorithms=" + ",".join(config.algorithms),
        f"replications={config.replications}",
        f"delta={config.delta!r}",
        f"master_seed={config.master_seed}",
        f"boundary_time_mode={config.boundary_time_mode.value}",
        f"clip_exponent={config.clip_exponent!r}",
        f"estimator={config.estimator.value}",
        f"batch_size={config.batch_size}",
    ]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
        logger.info(f"Wrote config to {path}")
    return text
