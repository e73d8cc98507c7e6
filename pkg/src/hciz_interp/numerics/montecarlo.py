"""Block-structured Monte Carlo reduction.

Samples are cut into fixed-size blocks; block ``i`` always draws from
substream ``i`` of the caller's :class:`RngStream`.  Per-block statistics
are merged in block order with Chan's update, so means and standard errors
do not depend on how many workers evaluated the blocks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .sampling import RngStream

DEFAULT_BLOCK = 1 << 16
THREADS_ENV = "HCIZ_INTERP_THREADS"


@dataclass(frozen=True)
class RunningMoments:
    count: int
    mean: float
    m2: float

    @classmethod
    def of(cls, values: np.ndarray) -> "RunningMoments":
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return cls(0, 0.0, 0.0)
        mean = float(np.mean(values))
        return cls(values.size, mean, float(np.sum((values - mean) ** 2)))

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return RunningMoments(n, mean, m2)

    @property
    def std_error(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.count - 1) / self.count)


def worker_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def block_sizes(samples: int, block: int = DEFAULT_BLOCK) -> list[int]:
    full, rest = divmod(samples, block)
    return [block] * full + ([rest] if rest else [])


def run_blocks(draw: Callable[[np.random.Generator, int], np.ndarray],
               samples: int, rng: RngStream, block: int = DEFAULT_BLOCK,
               workers: int | None = None) -> RunningMoments:
    """Evaluate ``draw(generator, count)`` over blocks and merge moments.

    ``draw`` must return a 1-D array of ``count`` real integrand values.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    sizes = block_sizes(samples, block)
    workers = worker_count() if workers is None else max(1, workers)

    def one(i: int) -> RunningMoments:
        values = draw(rng.generator(i), sizes[i])
        if values.shape != (sizes[i],):
            raise ValueError(f"integrand returned shape {values.shape}, expected {(sizes[i],)}")
        return RunningMoments.of(values)

    if workers == 1 or len(sizes) == 1:
        parts = [one(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    total = RunningMoments(0, 0.0, 0.0)
    for p in parts:
        total = total.merge(p)
    return total
