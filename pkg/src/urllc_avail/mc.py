"""Chunked, seed-stable Monte Carlo means.

A run of ``n`` samples is cut into fixed-size chunks; chunk ``i`` always draws
from substream ``(seed, i)`` and chunk statistics are merged in chunk order.
The result is therefore bit-identical for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import substream

THREADS_ENV = "URLLC_AVAIL_THREADS"
CHUNK = 1 << 20


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n: int
    seed: int
    low_confidence: bool = False

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        return self.mean - k * self.std_error, self.mean + k * self.std_error

    def agrees_with(self, value: float, k: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.mean - value) <= k * self.std_error + floor

    def scaled(self, factor: float) -> McEstimate:
        return McEstimate(self.mean * factor, self.std_error * abs(factor), self.n, self.seed,
                          self.low_confidence)


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _chunk_sizes(n: int, chunk: int) -> list[int]:
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])


def _merge(stats: list[tuple[int, float, float]]) -> tuple[int, float, float]:
    # Chan et al. pairwise update of (count, mean, M2), applied in chunk order
    count, mean, m2 = 0, 0.0, 0.0
    for n_b, mean_b, m2_b in stats:
        if n_b == 0:
            continue
        total = count + n_b
        delta = mean_b - mean
        mean += delta * n_b / total
        m2 += m2_b + delta * delta * count * n_b / total
        count = total
    return count, mean, m2


def mc_mean(sample: Callable[[np.random.Generator, int], np.ndarray], n: int, seed: int,
            workers: int | None = None, chunk: int = CHUNK,
            target_rel_error: float | None = None) -> McEstimate:
    """Mean of ``sample(rng, size)`` values over ``n`` draws with its standard error.

    ``sample`` must return one value per requested draw (antithetic pairs count
    as one draw each). When ``target_rel_error`` is set and not met, the
    estimate is flagged ``low_confidence``.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    sizes = _chunk_sizes(n, chunk)

    def run(i: int) -> tuple[int, float, float]:
        vals = np.asarray(sample(substream(seed, i), sizes[i]), dtype=float)
        m = float(np.sum(vals) / vals.size)
        return vals.size, m, float(np.sum((vals - m) ** 2))

    workers = default_workers() if workers is None else workers
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(run, range(len(sizes))))
    else:
        stats = [run(i) for i in range(len(sizes))]
    count, mean, m2 = _merge(stats)
    var = m2 / (count - 1) if count > 1 else 0.0
    se = math.sqrt(var / count)
    low = False
    if target_rel_error is not None:
        low = mean <= 0.0 or se > target_rel_error * mean
    return McEstimate(mean=mean, std_error=se, n=count, seed=seed, low_confidence=low)


def antithetic_exponential(rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit exponentials and their antithetic partners from shared uniforms."""
    u = rng.random(size)
    return -np.log1p(-u), -np.log(np.where(u > 0, u, np.finfo(float).tiny))
