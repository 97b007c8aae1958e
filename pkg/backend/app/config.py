"""
Simulation settings
Read once from the environment (and an optional .env file)
"""

from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Any, Dict, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

SEED_LIMIT = 2 ** 64
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class SimulationSettings:
    """Process-wide defaults for the simulator and experiment harness"""

    # Seed used when neither --seed nor QENS_SEED is supplied
    seed: int = 0

    # Dense statevector memory grows as 2^n
    max_qubits: int = 26
    max_ensemble_bits: int = 20

    # Worker threads for accuracy grids and proposal blocks
    threads: int = 1
    block_size: int = 65536

    # Hidden width of the three-hidden-layer network family
    hidden_width: int = 32

    log_level: str = "INFO"

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


_ENV_FIELDS = {
    "seed": "QENS_SEED",
    "max_qubits": "QENS_MAX_QUBITS",
    "max_ensemble_bits": "QENS_MAX_ENSEMBLE_BITS",
    "threads": "QENS_THREADS",
    "block_size": "QENS_BLOCK_SIZE",
    "hidden_width": "QENS_HIDDEN_WIDTH",
}


def _read_int(variable: str, default: int, minimum: int) -> int:
    raw = os.getenv(variable)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw.strip(), 0)
    except ValueError:
        raise ValueError(f"{variable} must be an integer, got {raw!r}") from None
    if value < minimum:
        raise ValueError(f"{variable} must be >= {minimum}, got {value}")
    return value


def load_settings(env_file: Optional[str] = None) -> SimulationSettings:
    """Build settings from QENS_* environment variables."""
    load_dotenv(env_file, override=False)
    defaults = SimulationSettings()

    values: Dict[str, Any] = {}
    for field_name, variable in _ENV_FIELDS.items():
        minimum = 0 if field_name == "seed" else 1
        values[field_name] = _read_int(variable, getattr(defaults, field_name), minimum)

    if values["seed"] >= SEED_LIMIT:
        raise ValueError(f"QENS_SEED must fit in 64 bits, got {values['seed']}")

    log_level = os.getenv("QENS_LOG_LEVEL", defaults.log_level).strip().upper()
    if log_level not in LOG_LEVELS:
        raise ValueError(f"QENS_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, got {log_level!r}")
    values["log_level"] = log_level

    settings = SimulationSettings(**values)
    logger.debug("Loaded settings: %s", settings.as_dict())
    return settings


@lru_cache(maxsize=1)
def get_settings() -> SimulationSettings:
    """Return the cached process settings."""
    return load_settings()


def reset_settings() -> None:
    """Forget cached settings so the next access re-reads the environment."""
    get_settings.cache_clear()
