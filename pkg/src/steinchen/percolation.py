"""d-neighbour bootstrap percolation on the torus (Z/nZ)^d.

A vertex has the 2d axis neighbours at l1-distance 1 (with wraparound; for
n = 2 the two neighbours along an axis coincide and are counted twice).  An
uninfected vertex becomes infected when at least d neighbours are infected,
all vertices updating simultaneously.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .mc import Proportion, map_replicates, replicate_rng

NEVER = math.inf


@dataclass(frozen=True, eq=False)
class TorusState:
    d: int
    n: int
    infected: np.ndarray
    time: int = 0

    def __post_init__(self):
        if self.d < 1 or self.n < 2:
            raise DomainError("need d >= 1 and n >= 2")
        x = np.array(self.infected, dtype=bool)
        if x.shape != (self.n,) * self.d:
            raise DomainError(f"infected array must have shape {(self.n,) * self.d}")
        x.setflags(write=False)
        object.__setattr__(self, "infected", x)

    @classmethod
    def empty(cls, d: int, n: int) -> "TorusState":
        return cls(d, n, np.zeros((n,) * d, dtype=bool))

    @classmethod
    def full(cls, d: int, n: int) -> "TorusState":
        return cls(d, n, np.ones((n,) * d, dtype=bool))

    @classmethod
    def random(cls, d: int, n: int, p: float, rng: np.random.Generator) -> "TorusState":
        return cls(d, n, seed_uniforms(d, n, rng) < p)

    @property
    def count(self) -> int:
        return int(self.infected.sum())

    @property
    def size(self) -> int:
        return self.n ** self.d

    @property
    def complete(self) -> bool:
        return bool(self.infected.all())


def seed_uniforms(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniforms driving the initial seeding; vertex v starts infected iff U_v < p."""
    return rng.random((n,) * d)


def neighbour_count(x: np.ndarray) -> np.ndarray:
    c = np.zeros(x.shape, dtype=np.int16)
    for axis in range(x.ndim):
        c += np.roll(x, 1, axis=axis)
        c += np.roll(x, -1, axis=axis)
    return c


def step(s: TorusState) -> TorusState:
    """One simultaneous update (double buffered)."""
    x = s.infected
    return TorusState(s.d, s.n, x | (neighbour_count(x) >= s.d), s.time + 1)


@dataclass(frozen=True)
class Trajectory:
    """Outcome of running the automaton to a fixed point."""

    T: float
    sizes: tuple[int, ...]
    infection_time: np.ndarray = field(repr=False)

    @property
    def percolated(self) -> bool:
        return self.T != NEVER

    def snapshots(self) -> list[tuple[int, int]]:
        return list(enumerate(self.sizes))


def _finish(times: np.ndarray, sizes: list[int], total: int) -> Trajectory:
    T = float(len(sizes) - 1) if sizes[-1] == total else NEVER
    return Trajectory(T, tuple(sizes), times)


def run_sweep(x0: np.ndarray, d: int) -> Trajectory:
    """Full-lattice double-buffer sweeps until nothing changes."""
    x = np.array(x0, dtype=bool)
    times = np.where(x, 0.0, NEVER)
    sizes = [int(x.sum())]
    t = 0
    while sizes[-1] < x.size:
        new = ~x & (neighbour_count(x) >= d)
        if not new.any():
            break
        t += 1
        x = x | new
        times[new] = t
        sizes.append(int(x.sum()))
    return _finish(times, sizes, x.size)


@lru_cache(maxsize=16)
def neighbour_table(d: int, n: int) -> np.ndarray:
    """(n^d, 2d) flat indices of each vertex's axis neighbours."""
    idx = np.arange(n ** d).reshape((n,) * d)
    cols = []
    for axis in range(d):
        cols.append(np.roll(idx, -1, axis=axis).ravel())
        cols.append(np.roll(idx, 1, axis=axis).ravel())
    table = np.stack(cols, axis=1)
    table.setflags(write=False)
    return table


def run_frontier(x0: np.ndarray, d: int) -> Trajectory:
    """Event-driven engine: only neighbours of newly infected vertices are re-examined."""
    shape = np.shape(x0)
    n = shape[0]
    nb = neighbour_table(d, n)
    x = np.array(x0, dtype=bool).ravel()
    times = np.where(x, 0.0, NEVER)
    count = x[nb].sum(axis=1).astype(np.int32)
    sizes = [int(x.sum())]
    cand = np.flatnonzero(~x)
    t = 0
    while sizes[-1] < x.size:
        new = cand[~x[cand] & (count[cand] >= d)]
        if new.size == 0:
            break
        t += 1
        x[new] = True
        times[new] = t
        touched = nb[new].ravel()
        np.add.at(count, touched, 1)
        cand = np.unique(touched)
        sizes.append(int(x.sum()))
    return _finish(times.reshape(shape), sizes, x.size)


def run(x0: np.ndarray, d: int, engine: str = "auto") -> Trajectory:
    if engine == "auto":
        engine = "sweep" if np.size(x0) <= 4096 else "frontier"
    if engine == "sweep":
        return run_sweep(x0, d)
    if engine == "frontier":
        return run_frontier(x0, d)
    raise DomainError(f"unknown engine {engine!r}")


def percolation_time(d: int, n: int, p: float, seed: int, rep: int = 0,
                     engine: str = "auto") -> Trajectory:
    """Seed each vertex with probability p and run to a fixed point."""
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    u = seed_uniforms(d, n, replicate_rng(seed, rep))
    return run(u < p, d, engine)


def coupled_times(d: int, n: int, p_low: float, p_high: float, seed: int, rep: int = 0,
                  engine: str = "auto") -> tuple[float, float]:
    """Percolation times for nested seedings built from one uniform field."""
    if p_low > p_high:
        raise DomainError("need p_low <= p_high")
    u = seed_uniforms(d, n, replicate_rng(seed, rep))
    return run(u < p_low, d, engine).T, run(u < p_high, d, engine).T


def m_t(d: int, t: int) -> int:
    """sum_{r=0}^t sum_{j=0}^r C(d, j)."""
    if d < 1 or t < 0:
        raise DomainError("need d >= 1 and t >= 0")
    return sum(math.comb(d, j) for r in range(t + 1) for j in range(r + 1))


class Regime(str, Enum):
    FAST = "FAST"
    TWO_POINT = "TWO_POINT"
    OUTSIDE = "OUTSIDE"


@dataclass(frozen=True)
class Classification:
    regime: Regime
    t: int
    fast_window: tuple[float, float]
    two_point_window: tuple[float, float]

    def __str__(self) -> str:
        return self.regime.value if self.regime is Regime.OUTSIDE else f"{self.regime.value}({self.t})"


def regime_windows(d: int, n: int, t: int, omega: float | None = None):
    """q-intervals for the one-point and two-point concentration regimes at time t.

    At t = 0 the lower end of the one-point window is dropped (set to 0).
    """
    omega = math.log(n) if omega is None else float(omega)
    if omega <= 0:
        raise DomainError("omega must be positive")
    vol = float(n) ** d
    hi_fast = (1.0 / (omega * vol)) ** (1.0 / m_t(d, t))
    lo_fast = 0.0 if t == 0 else (omega / vol) ** (1.0 / m_t(d, t - 1))
    hi_two = (omega / vol) ** (1.0 / m_t(d, t))
    return (lo_fast, hi_fast), (hi_fast, hi_two)


def regime_classify(d: int, n: int, t: int, q: float, omega: float | None = None) -> Classification:
    if not 0.0 < q < 1.0:
        raise DomainError("q must lie in (0, 1)")
    fast, two = regime_windows(d, n, t, omega)
    if fast[0] <= q <= fast[1]:
        reg = Regime.FAST
    elif two[0] <= q <= two[1]:
        reg = Regime.TWO_POINT
    else:
        reg = Regime.OUTSIDE
    return Classification(reg, t, fast, two)


def fast_midpoint(d: int, n: int, t: int, omega: float | None = None) -> float:
    """Geometric midpoint of the one-point window (needs t >= 1)."""
    (lo, hi), _ = regime_windows(d, n, t, omega)
    if t < 1 or lo > hi:
        raise DomainError("one-point window is empty")
    return math.sqrt(lo * hi)


def _open_step(x: np.ndarray, d: int) -> np.ndarray:
    """Simultaneous update on a batch of boxes (axis 0) with uninfected exterior."""
    c = np.zeros(x.shape, dtype=np.int16)
    for axis in range(1, x.ndim):
        lo = [slice(None)] * x.ndim
        hi = [slice(None)] * x.ndim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        c[tuple(hi)] += x[tuple(lo)]
        c[tuple(lo)] += x[tuple(hi)]
    return x | (c >= d)


def origin_uninfected(u: np.ndarray, p: float, d: int, t: int) -> np.ndarray:
    """For a batch of uniform boxes of side 2t+1, whether the centre is uninfected at time t.

    The centre's state at time t depends only on seeds within l1-distance t,
    all of which lie inside the box, so a box with an uninfected exterior
    gives the exact torus answer whenever n >= 2t + 2.
    """
    x = u < p
    for _ in range(t):
        x = _open_step(x, d)
    return ~x[(slice(None),) + (t,) * d]


@dataclass(frozen=True)
class RhoEstimate:
    estimate: Proportion

    @property
    def rho_hat(self) -> float:
        return self.estimate.estimate

    @property
    def stderr(self) -> float:
        return self.estimate.stderr


def estimate_rho(d: int, t: int, p: float, reps: int, seed: int, threads: int = 1,
                 chunk: int = 256) -> RhoEstimate:
    """Monte Carlo estimate of P(origin uninfected at time t)."""
    if t < 0 or reps < 1:
        raise DomainError("need t >= 0 and reps >= 1")
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    side = 2 * t + 1
    if side ** d > 1 << 22:
        raise DomainError("dependence box too large")

    def work(idx: range) -> list[bool]:
        out: list[bool] = []
        for lo in range(idx.start, idx.stop, chunk):
            ids = range(lo, min(idx.stop, lo + chunk))
            u = np.stack([replicate_rng(seed, i).random((side,) * d) for i in ids])
            out += origin_uninfected(u, p, d, t).tolist()
        return out

    hits = map_replicates(work, reps, threads)
    return RhoEstimate(Proportion(int(sum(hits)), reps))


@dataclass(frozen=True)
class TDistribution:
    reps: int
    counts: dict[float, int]

    def prob(self, T: float) -> float:
        return self.counts.get(T, 0) / self.reps

    def stderr(self, T: float) -> float:
        p = self.prob(T)
        return math.sqrt(p * (1.0 - p) / self.reps)

    def cdf(self, t: float) -> float:
        return sum(c for k, c in self.counts.items() if k <= t) / self.reps

    def rows(self) -> list[tuple[str, float, float]]:
        return [("NEVER" if k == NEVER else str(int(k)), self.prob(k), self.stderr(k))
                for k in sorted(self.counts)]


def mc_T_distribution(d: int, n: int, p: float, reps: int, seed: int, threads: int = 1,
                      engine: str = "auto") -> TDistribution:
    def work(idx: range) -> list[float]:
        return [percolation_time(d, n, p, seed, i, engine).T for i in idx]

    values = map_replicates(work, reps, threads)
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return TDistribution(reps, dict(sorted(counts.items())))
