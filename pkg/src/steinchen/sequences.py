"""Binary-sequence applications: longest head run and maximal arithmetic progressions.

Head runs are counted on a sequence of ``n`` tosses through declumped
indicators X_1 = Y_1...Y_t and X_i = (1 - Y_{i-1}) Y_i...Y_{i+t-1} for the
start positions i = 1..n-t+1, so {longest run < t} = {W = 0}.

Arithmetic progressions use pairs (a, s) with a >= 1 and a + t s <= n; the
pair fires when xi_a = 0 and xi_{a+s} = ... = xi_{a+ts} = 1.  Optionally the
pairs with a = 0 are added under the convention xi_0 = 0, which also counts
progressions whose first element has no predecessor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, SizeError
from .mc import Proportion, map_replicates, replicate_rng
from .oracle import JointTable, popcount

MAX_ENUM = 24


def _check_p(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise DomainError(f"success probability must lie in (0, 1), got {p!r}")


@dataclass(frozen=True)
class HeadRunModel:
    n: int
    t: int
    p: float

    def __post_init__(self):
        if not 1 <= self.t <= self.n:
            raise DomainError(f"need 1 <= t <= n, got t={self.t}, n={self.n}")
        _check_p(self.p)

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def lam(self) -> float:
        """E W summed over the declumped start indicators."""
        pt = self.p ** self.t
        return pt + (self.n - self.t) * self.q * pt


@dataclass(frozen=True)
class HeadRunBound:
    lam: float
    bound: float


def headrun_bound(m: HeadRunModel) -> HeadRunBound:
    lam = m.lam
    w = 1.0 if lam <= 1 else 1.0 / lam
    b = w * (lam * lam * (2 * m.t + 1) / m.n + lam * m.p ** m.t)
    return HeadRunBound(lam, b)


def headrun_run_prob(m: HeadRunModel) -> float:
    """P(some run of t heads), accumulated directly to avoid cancellation near 1.

    Transfer recursion over the trailing run length 0..t-1; mass that reaches
    length t is absorbed.
    """
    p, q, t = m.p, m.q, m.t
    v = np.zeros(t)
    v[0] = 1.0
    absorbed = 0.0
    for _ in range(m.n):
        absorbed += p * v[-1]
        new = np.empty(t)
        new[0] = q * v.sum()
        new[1:] = p * v[:-1]
        v = new
    return absorbed


def headrun_exact(m: HeadRunModel) -> float:
    """P(longest run < t) by the transfer recursion."""
    p, q, t = m.p, m.q, m.t
    v = np.zeros(t)
    v[0] = 1.0
    for _ in range(m.n):
        new = np.empty(t)
        new[0] = q * v.sum()
        new[1:] = p * v[:-1]
        v = new
    return float(v.sum())


@lru_cache(maxsize=64)
def _run_counts(n: int, t: int) -> tuple[int, ...]:
    """Number of length-n sequences with k heads that contain a run of t heads."""
    if n > MAX_ENUM:
        raise SizeError(f"enumeration limited to n <= {MAX_ENUM}")
    counts = np.zeros(n + 1, dtype=np.int64)
    step = 1 << 20
    for lo in range(0, 1 << n, step):
        u = np.arange(lo, min(lo + step, 1 << n), dtype=np.int64)
        r = u.copy()
        for i in range(1, t):
            r &= u >> i
        hit = r != 0
        counts += np.bincount(popcount(u[hit]), minlength=n + 1)
    return tuple(int(c) for c in counts)


def headrun_enumerate(m: HeadRunModel) -> float:
    """P(some run of t heads) by summing over all 2^n sequences."""
    counts = np.array(_run_counts(m.n, m.t), dtype=float)
    k = np.arange(m.n + 1)
    w = np.exp(k * math.log(m.p) + (m.n - k) * math.log1p(-m.p))
    return math.fsum((counts * w).tolist())


def headrun_error(m: HeadRunModel) -> float:
    """|P(longest run < t) - e^{-lambda}| computed from the run probability."""
    return abs(-math.expm1(-m.lam) - headrun_run_prob(m))


def headrun_joint_table(m: HeadRunModel) -> JointTable:
    """Joint law of the declumped start indicators (enumerates 2^n coin outcomes)."""
    from .systems import head_run_system

    return head_run_system(m.n, m.t, m.p).joint


@dataclass(frozen=True)
class AsymptoticCheck:
    t: int
    r: float
    lhs: float
    rhs: float
    bound: float | None


def headrun_asymptotic_check(n: int, p: float, c: int) -> AsymptoticCheck:
    """Exact P(R_n < floor(L) + c) against exp(-p^{c - r}), L = log_{1/p}(n q), r = frac(L)."""
    _check_p(p)
    L = math.log(n * (1.0 - p)) / -math.log(p)
    base = math.floor(L)
    r = L - base
    t = base + c
    rhs = math.exp(-(p ** (c - r)))
    if t < 1:
        return AsymptoticCheck(t, r, 0.0, rhs, None)
    if t > n:
        return AsymptoticCheck(t, r, 1.0, rhs, None)
    m = HeadRunModel(n, t, p)
    return AsymptoticCheck(t, r, float(1.0 - headrun_run_prob(m)), rhs, headrun_bound(m).bound)


def _headrun_hits(rows: np.ndarray, t: int) -> np.ndarray:
    c = np.concatenate([np.zeros((rows.shape[0], 1), np.int32), np.cumsum(rows, 1, dtype=np.int32)], 1)
    return np.any(c[:, t:] - c[:, :-t] == t, axis=1)


def headrun_mc_estimate(m: HeadRunModel, reps: int, seed: int, threads: int = 1) -> Proportion:
    """Monte Carlo estimate of P(longest run < t)."""

    def work(idx: range) -> list[bool]:
        rows = np.stack([replicate_rng(seed, i).random(m.n) < m.p for i in idx]).astype(np.int8)
        return (~_headrun_hits(rows, m.t)).tolist()

    hits = map_replicates(work, reps, threads)
    return Proportion(int(sum(hits)), reps)


# arithmetic progressions


def ap_index_count(n: int, t: int) -> int:
    """|{(a, s): a, s >= 1, a + t s <= n}|."""
    if n < 1 or t < 1:
        raise DomainError("need n >= 1 and t >= 1")
    return sum(n - t * s for s in range(1, (n - 1) // t + 1))


def ap_index_count_brute(n: int, t: int) -> int:
    return sum(1 for s in range(1, n + 1) for a in range(1, n + 1) if a + t * s <= n)


def ap_boundary_count(n: int, t: int) -> int:
    """Number of pairs (0, s) with t s <= n."""
    return n // t


@dataclass(frozen=True)
class APModel:
    n: int
    t: int
    p: float
    boundary: bool = False

    def __post_init__(self):
        if self.n < 1 or self.t < 1:
            raise DomainError("need n >= 1 and t >= 1")
        _check_p(self.p)

    @property
    def index_count(self) -> int:
        return ap_index_count(self.n, self.t)

    @property
    def lam(self) -> float:
        pt = self.p ** self.t
        lam = self.index_count * (1.0 - self.p) * pt
        if self.boundary:
            lam += ap_boundary_count(self.n, self.t) * pt
        return lam


def ap_lambda(n: int, t: int, p: float) -> float:
    return APModel(n, t, p).lam


@dataclass(frozen=True)
class APThreshold:
    t: int
    delta: float
    real_t: float


def ap_threshold(n: int, p: float, x: float) -> APThreshold:
    """Integer t = x - 2 ln n / ln p + ln ln n / ln p - delta with delta in [0, 1)."""
    _check_p(p)
    if n < 3:
        raise DomainError("need n >= 3 so that ln ln n is defined")
    lp = math.log(p)
    real_t = x - 2.0 * math.log(n) / lp + math.log(math.log(n)) / lp
    t = math.floor(real_t)
    return APThreshold(t, real_t - t, real_t)


def ap_gumbel_approx(x: float, p: float, delta: float) -> float:
    """exp((1 - p) p^{x - delta} ln p / 4)."""
    _check_p(p)
    if not 0.0 <= delta < 1.0:
        raise DomainError("delta must lie in [0, 1)")
    return math.exp((1.0 - p) * p ** (x - delta) * math.log(p) / 4.0)


def _with_origin(xi: np.ndarray, boundary: bool) -> np.ndarray:
    """Prefix column for position 0: a zero when a = 0 is allowed, else a one
    (a one at position 0 can never serve as the required predecessor zero)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=np.int8))
    head = np.full((xi.shape[0], 1), 0 if boundary else 1, dtype=np.int8)
    return np.concatenate([head, xi], axis=1)


def _stride_starts(z: np.ndarray, s: int, t: int) -> np.ndarray:
    """Boolean (reps, L, s): a progression of stride s with predecessor at (l, r)."""
    reps, n1 = z.shape
    L = -(-n1 // s)
    pad = np.zeros((reps, L * s), dtype=np.int8)
    pad[:, :n1] = z
    g = pad.reshape(reps, L, s)
    if L < t + 1:
        return np.zeros((reps, 0, s), dtype=bool)
    c = np.zeros((reps, L + 1, s), dtype=np.int16)
    np.cumsum(g, axis=1, dtype=np.int16, out=c[:, 1:])
    # ones at l+1..l+t and a zero at l
    ones = c[:, t + 1 :] - c[:, 1 : L - t + 1] == t
    return ones & (g[:, : L - t] == 0)


def ap_count(xi: np.ndarray, t: int, boundary: bool = False) -> np.ndarray:
    """W_{n,t} for each row of ``xi`` (positions 1..n)."""
    z = _with_origin(xi, boundary)
    n = z.shape[1] - 1
    out = np.zeros(z.shape[0], dtype=np.int64)
    for s in range(1, n // t + 1):
        out += _stride_starts(z, s, t).sum(axis=(1, 2))
    return out


def ap_any(xi: np.ndarray, t: int, boundary: bool = False) -> np.ndarray:
    """Whether each row of ``xi`` holds a progression of length at least t."""
    z = _with_origin(xi, boundary)
    n = z.shape[1] - 1
    out = np.zeros(z.shape[0], dtype=bool)
    for s in range(1, n // t + 1):
        live = ~out
        if not live.any():
            break
        out[live] |= _stride_starts(z[live], s, t).any(axis=(1, 2))
    return out


def ap_exact_no_progression(n: int, t: int, p: float, boundary: bool = False) -> float:
    """P(W_{n,t} = 0) by enumerating all 2^n sequences."""
    if n > 20:
        raise SizeError("enumeration limited to n <= 20")
    _check_p(p)
    u = np.arange(1 << n, dtype=np.int64)
    xi = ((u[:, None] >> np.arange(n)) & 1).astype(np.int8)
    none = ~ap_any(xi, t, boundary)
    k = popcount(u)
    w = np.exp(k * math.log(p) + (n - k) * math.log1p(-p))
    return math.fsum(w[none].tolist())


def ap_pairs(n: int, t: int) -> np.ndarray:
    """All (a, s) in the index set, sorted by stride then start."""
    return np.array([(a, s) for s in range(1, (n - 1) // t + 1) for a in range(1, n - t * s + 1)],
                    dtype=np.int64).reshape(-1, 2)


def ap_joint_table(n: int, t: int, p: float) -> JointTable:
    """Joint law of the progression indicators on n coins (small n only)."""
    pairs = ap_pairs(n, t)
    sets = [[a + k * s for k in range(t + 1)] for a, s in pairs]

    def fire(u: int) -> int:
        out = 0
        for j, (a, *rest) in enumerate(sets):
            if not (u >> (a - 1)) & 1 and all((u >> (b - 1)) & 1 for b in rest):
                out |= 1 << j
        return out

    return JointTable.from_coins(n, p, len(pairs), fire)


@dataclass(frozen=True)
class OverlapProfile:
    n: int
    t: int
    pairs_checked: int
    observed: dict[int, int]
    ceiling: dict[int, int]
    violations: list[tuple[int, int, int]]

    @property
    def ok(self) -> bool:
        return not self.violations


def overlap_ceiling(n: int, t: int, k: int) -> int:
    if k == 1:
        return (t + 1) ** 2 * n
    if 2 <= k <= t / 2 + 1:
        return (t + 1) ** 2 * t ** 2
    return 0


def ap_overlap_profile(n: int, t: int, samples: int | None = None, seed: int = 0) -> OverlapProfile:
    """Largest D_{a,s}(k) over (sampled) pairs, against the published ceilings.

    D_{a,s}(k) counts pairs (a', s') with s' != s whose progression sets meet
    that of (a, s) in exactly k points.
    """
    pairs = ap_pairs(n, t)
    if pairs.size == 0:
        return OverlapProfile(n, t, 0, {}, {}, [])
    M = np.zeros((len(pairs), n + 1), dtype=np.float32)
    for j, (a, s) in enumerate(pairs):
        M[j, a : a + t * s + 1 : s] = 1.0
    rows = np.arange(len(pairs))
    if samples is not None and samples < len(pairs):
        rows = np.sort(np.random.default_rng(seed).choice(len(pairs), samples, replace=False))
    observed = {k: 0 for k in range(1, t + 2)}
    block = 512
    for lo in range(0, rows.size, block):
        r = rows[lo : lo + block]
        ov = (M[r] @ M.T).astype(np.int64)
        ov[pairs[r, 1][:, None] == pairs[None, :, 1]] = 0
        for k in range(1, t + 2):
            observed[k] = max(observed[k], int((ov == k).sum(axis=1).max()))
    ceiling = {k: overlap_ceiling(n, t, k) for k in observed}
    bad = [(k, observed[k], ceiling[k]) for k in observed if observed[k] > ceiling[k]]
    return OverlapProfile(n, t, int(rows.size), observed, ceiling, bad)


@dataclass(frozen=True)
class APEstimate:
    t: int
    lam: float
    estimate: Proportion
    target: float

    @property
    def phat(self) -> float:
        return self.estimate.estimate

    @property
    def stderr(self) -> float:
        return self.estimate.stderr


def ap_mc_estimate(m: APModel, reps: int, seed: int, threads: int = 1, chunk: int = 64) -> APEstimate:
    """Monte Carlo P(U_n < t) = P(W_{n,t} = 0) over i.i.d. Bernoulli(p) sequences."""
    if reps < 1:
        raise DomainError("reps must be positive")

    def work(idx: range) -> list[bool]:
        out: list[bool] = []
        for lo in range(idx.start, idx.stop, chunk):
            ids = range(lo, min(idx.stop, lo + chunk))
            xi = np.stack([replicate_rng(seed, i).random(m.n) < m.p for i in ids])
            out += (~ap_any(xi, m.t, m.boundary)).tolist()
        return out

    if m.t > m.n:
        est = Proportion(reps, reps)
    else:
        est = Proportion(int(sum(map_replicates(work, reps, threads))), reps)
    return APEstimate(m.t, m.lam, est, math.exp(-m.lam))
