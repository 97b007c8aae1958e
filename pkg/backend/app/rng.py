"""
Seeded random streams and an order-preserving worker map.

Generator identity: numpy PCG64 seeded through ``SeedSequence(entropy=seed,
spawn_key=keys)``. A stream is a pure function of ``(seed, *keys)``, so work
split over threads draws exactly the numbers a serial run would.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

GENERATOR_IDENTITY = "numpy.PCG64 via SeedSequence(entropy=seed, spawn_key=keys)"

# Stream tags keep data, model, proposal and test draws apart under one seed
DATA_STREAM = 0
MODEL_STREAM = 1
PROPOSAL_STREAM = 2
TEST_STREAM = 3
GROUND_TRUTH_STREAM = 4
QUERY_STREAM = 5


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator for ``(seed, *keys)``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    if any(k < 0 for k in keys):
        raise ValueError(f"stream keys must be non-negative, got {keys}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(sequence))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """Apply ``fn`` to every item, returning results in input order."""
    items = list(items)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    if threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]

    logger.debug("Mapping %d items over %d threads", len(items), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
