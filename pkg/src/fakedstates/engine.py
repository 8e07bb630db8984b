"""Monte Carlo harness: seeding, block partitioning, interval estimates.

Randomness is counter-based and splittable: trials are grouped into
fixed-size blocks and block ``i`` always draws from
``Philox(SeedSequence(seed, spawn_key=(i,)))`` regardless of how blocks are
scheduled across workers. Counters are integer sums over blocks, so results
are invariant to the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

#: Trials per randomness block; fixed so repartitioning cannot move a trial
#: into a different stream.
BLOCK_SIZE = 1 << 14

#: 97.5% standard-normal quantile for the 95% Wilson interval.
_Z95 = 1.959963984540054


def derive_stream(seed: int, partition: int) -> Generator:
    """Independent, reproducible substream for one block of trials."""
    return Generator(Philox(SeedSequence(seed, spawn_key=(partition,))))


def accumulate_blocks(
    n_items: int,
    n_uniforms: int,
    kernel,
    args: tuple,
    seed: int,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> np.ndarray:
    """Run ``kernel(u, *args)`` over blocks of trials and sum its counters.

    ``kernel`` receives a (block_items, n_uniforms) float64 matrix of
    uniforms (one row per trial) and must return an int64 counter vector.
    The block structure, not the worker count, determines every draw.
    """
    n_blocks = -(-n_items // block_size) if n_items else 0

    def run_block(i: int) -> np.ndarray:
        count = min(block_size, n_items - i * block_size)
        u = derive_stream(seed, i).random((count, n_uniforms))
        return np.asarray(kernel(u, *args), dtype=np.int64)

    totals: Optional[np.ndarray] = None
    if workers <= 1 or n_blocks <= 1:
        for i in range(n_blocks):
            c = run_block(i)
            totals = c if totals is None else totals + c
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for c in pool.map(run_block, range(n_blocks)):
                totals = c if totals is None else totals + c
    if totals is None:
        raise ValueError("no trials requested")
    return totals


@dataclass(frozen=True)
class QberEstimate:
    """Point estimate with a 95% Wilson score interval."""

    errors: int
    kept: int
    point: float
    low: float
    high: float

    @property
    def defined(self) -> bool:
        return self.kept > 0


def qber_estimate(errors: int, kept: int) -> QberEstimate:
    """Wilson 95% interval for an error fraction; kept=0 yields the undefined
    marker (NaN point, vacuous [0, 1] interval)."""
    if errors < 0 or errors > kept:
        raise ValueError("need 0 <= errors <= kept")
    if kept == 0:
        return QberEstimate(errors, kept, math.nan, 0.0, 1.0)
    p = errors / kept
    z2 = _Z95 * _Z95
    denom = 1.0 + z2 / kept
    center = (p + z2 / (2.0 * kept)) / denom
    half = _Z95 * math.sqrt(p * (1.0 - p) / kept + z2 / (4.0 * kept * kept)) / denom
    return QberEstimate(errors, kept, p, max(0.0, center - half), min(1.0, center + half))


def binomial_sigma(p: float, n: int) -> float:
    """Standard deviation of an empirical fraction at true probability p."""
    if n <= 0:
        return math.inf
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)
