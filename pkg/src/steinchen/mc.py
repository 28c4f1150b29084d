"""Seeded Monte Carlo plumbing.

Every replicate draws from its own counter-based stream keyed by
``(seed, replicate index)``, so results do not depend on how replicates are
spread over threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")


def replicate_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(rep)])))


def _chunks(reps: int, threads: int) -> list[range]:
    size = max(1, math.ceil(reps / max(1, threads * 4)))
    return [range(i, min(reps, i + size)) for i in range(0, reps, size)]


def map_replicates(fn: Callable[[range], Sequence[T]], reps: int, threads: int = 1) -> list[T]:
    """Apply ``fn`` to contiguous replicate ranges and concatenate in index order."""
    chunks = _chunks(reps, threads)
    if threads <= 1 or len(chunks) == 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(fn, chunks))
    return [x for part in parts for x in part]


@dataclass(frozen=True)
class Proportion:
    """A Monte Carlo frequency with its binomial standard error."""

    hits: int
    reps: int

    @property
    def estimate(self) -> float:
        return self.hits / self.reps

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1.0 - p) / self.reps)

    def within(self, target: float, n_se: float = 4.0) -> bool:
        """|estimate - target| <= n_se standard errors, using the target's own
        binomial error so a degenerate sample cannot claim zero spread."""
        se = max(self.stderr, math.sqrt(target * (1.0 - target) / self.reps))
        return abs(self.estimate - target) <= n_se * se
