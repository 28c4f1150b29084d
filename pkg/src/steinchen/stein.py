"""Numerical solutions of the Poisson and compound Poisson Stein equations.

Poisson:   lam f(w+1) - w f(w) = 1[w in A] - P(Z in A)
Compound:  sum_i i lam_i f(w+i) - w f(w) = 1[w in A] - P(Z in A)

with f(0) = 0 by convention; f(0) never enters any bound.  Sup norms and
increments are therefore taken over w >= 1.

The Poisson equation is a first-order recursion.  Running it forward is exact
in exact arithmetic but amplifies round-off by w/lam per step once w > lam,
so the sweep switches to the equivalent backward recursion above the mean.
The compound equation couples f(w) to f(w+1..w+M); it is solved as a
truncated linear system closed by f(w) = f(N) above the truncation point N.
Both solvers report the residual of the equation on the checked range, so
truncation error is observable rather than assumed away.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .dist import CompoundSpec, Pmf, cp_cutoff, cp_pmf_panjer, poisson_pmf
from .errors import DomainError, NumericError

SOLVER_TOL = 1e-8
BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class TargetSet:
    """A set A of non-negative integers: ``members`` plus, optionally, every k > cutoff."""

    members: frozenset[int]
    cutoff: int
    tail: bool = False

    def __post_init__(self):
        members = frozenset(int(k) for k in self.members)
        object.__setattr__(self, "members", members)
        if any(k < 0 or k > self.cutoff for k in members):
            raise DomainError("explicit members must lie in 0..cutoff")

    @classmethod
    def of(cls, members: Iterable[int], cutoff: int | None = None, tail: bool = False):
        members = frozenset(members)
        if cutoff is None:
            cutoff = max(members, default=0)
        return cls(members, cutoff, tail)

    @classmethod
    def everything(cls) -> "TargetSet":
        return cls(frozenset({0}), 0, True)

    def complement(self) -> "TargetSet":
        rest = frozenset(range(self.cutoff + 1)) - self.members
        return TargetSet(rest, self.cutoff, not self.tail)

    def indicator(self, upto: int) -> np.ndarray:
        h = np.zeros(upto + 1)
        for k in self.members:
            if k <= upto:
                h[k] = 1.0
        if self.tail and upto > self.cutoff:
            h[self.cutoff + 1 :] = 1.0
        return h

    def prob(self, P: Pmf) -> float:
        """P(A) under ``P``; unlisted tail mass counts iff the set contains the tail."""
        hi = max(P.end, self.cutoff)
        total = float(np.dot(self.indicator(hi), P.dense(hi)))
        if self.tail:
            total += P.tail_mass
        return total

    def __str__(self) -> str:
        body = ",".join(str(k) for k in sorted(self.members))
        return "{" + body + (f",>{self.cutoff}" if self.tail else "") + "}"


@dataclass(frozen=True, eq=False)
class SteinTable:
    kind: str
    params: float | CompoundSpec
    target: TargetSet
    f: np.ndarray
    residual: float
    tol: float = SOLVER_TOL

    @property
    def K(self) -> int:
        return len(self.f) - 1

    @property
    def converged(self) -> bool:
        return self.residual <= self.tol

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.f[1:]))) if self.K >= 1 else 0.0

    def sup_increment(self) -> float:
        return float(np.max(np.abs(np.diff(self.f[1:])))) if self.K >= 2 else 0.0


def default_poisson_cutoff(lam: float) -> int:
    return int(math.ceil(lam + 10 * math.sqrt(lam) + 30))


def _poisson_solution(lam: float, G: np.ndarray, g_tail: np.ndarray) -> np.ndarray:
    """f on 0..K for each column of G (the centred test function on 0..K).

    ``g_tail`` is the value the centred test function takes above K.  Below
    the mean the forward recursion f(w+1) = (w f(w) + g(w)) / lam is used;
    above it the backward form f(w) = (lam f(w+1) - g(w)) / w, started far
    enough out that the start-up error is damped below double precision.
    """
    K = G.shape[0] - 1
    m = G.shape[1]
    split = min(K, int(math.floor(lam)))
    top = max(K, int(math.ceil(2 * lam))) + 80
    f = np.zeros((top + 2, m))
    # forward on w = 0..split-1 gives f(1..split)
    for w in range(split):
        f[w + 1] = (w * f[w] + G[w]) / lam
    # backward from top: g(w) for w > K is g_tail
    Gx = np.vstack([G, np.broadcast_to(g_tail, (top + 1 - K, m))])
    # f(top+1) ~ -g_tail lam/(top+1-lam) is the tail-ratio estimate; damped anyway
    f[top + 1] = -g_tail / (top + 1 - lam)
    for w in range(top, split, -1):
        f[w] = (lam * f[w + 1] - Gx[w]) / w
    return f[: K + 1]


def _poisson_residual(lam: float, f: np.ndarray, G: np.ndarray) -> np.ndarray:
    """max_w |lam f(w+1) - w f(w) - g(w)| over w = 0..K-1, per column."""
    K = f.shape[0] - 1
    w = np.arange(K)[:, None]
    r = lam * f[1:] - w * f[:-1] - G[:-1]
    return np.max(np.abs(r), axis=0) if K else np.zeros(f.shape[1])


def _poisson_law(lam: float) -> Pmf:
    return poisson_pmf(lam, 1e-17)


def solve_stein_poisson(lam: float, A: TargetSet, K: int | None = None) -> SteinTable:
    """Bounded solution of the Poisson Stein equation for h = 1_A on 0..K."""
    if not lam > 0:
        raise DomainError("Poisson mean must be positive")
    K = default_poisson_cutoff(lam) if K is None else int(K)
    if K < 1:
        raise DomainError("cutoff K must be at least 1")
    Kc = max(K, A.cutoff + 1)
    pa = A.prob(_poisson_law(lam))
    G = (A.indicator(Kc) - pa)[:, None]
    g_tail = np.array([(1.0 if A.tail else 0.0) - pa])
    f = _poisson_solution(lam, G, g_tail)
    res = _poisson_residual(lam, f[: K + 1], G[: K + 1])
    return SteinTable("poisson", lam, A, f[: K + 1, 0], float(res[0]))


def poisson_f_bound(lam: float) -> float:
    return min(1.0, 1.4 / math.sqrt(lam))


def poisson_df_bound(lam: float) -> float:
    return -math.expm1(-lam) / lam


@dataclass
class BoundReport:
    """Worst-case ratios of observed solution norms to the published bounds."""

    label: str
    n_sets: int
    worst_f_ratio: float
    worst_df_ratio: float
    worst_residual: float
    worst_f_set: str = ""
    worst_df_set: str = ""
    extra: dict = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _subset_matrix(size: int, n_samples: int, rng: np.random.Generator | None) -> np.ndarray:
    """Rows are 0/1 membership vectors: every subset, or ``n_samples`` random ones."""
    if rng is None:
        return np.array(list(itertools.product((0.0, 1.0), repeat=size)))
    return rng.integers(0, 2, size=(n_samples, size)).astype(float)


def _describe(row: np.ndarray, labels: list[str]) -> str:
    return "{" + ",".join(lab for lab, b in zip(labels, row) if b) + "}"


def verify_poisson_solution_bounds(
    lam: float,
    K: int = 12,
    *,
    window_start: int = 0,
    max_exhaustive: int = 16,
    n_samples: int = 10_000,
    seed: int = 0,
) -> BoundReport:
    """Check ||f_A|| <= 1 ^ 1.4/sqrt(lam) and ||Delta f_A|| <= (1-e^{-lam})/lam.

    Target sets are built from the window ``{s, ..., s+K-1}`` (s =
    ``window_start``): every subset of the window when ``K <= max_exhaustive``
    (otherwise ``n_samples`` random subsets), each combined with or without
    the block below the window and with or without the tail above it.
    Because the solution is linear in the indicator, the solution for each
    set is assembled from the solutions for the basic blocks.
    """
    if not lam > 0:
        raise DomainError("Poisson mean must be positive")
    s = int(window_start)
    Kc = max(default_poisson_cutoff(lam), s + K + 2)
    law = _poisson_law(lam)
    labels = [str(s + j) for j in range(K)]
    blocks = [TargetSet(frozenset({s + j}), s + j) for j in range(K)]
    if s > 0:
        labels.append(f"<{s}")
        blocks.append(TargetSet(frozenset(range(s)), s - 1))
    labels.append(f">{s + K - 1}")
    blocks.append(TargetSet(frozenset(), s + K - 1, True))

    G = np.column_stack([b.indicator(Kc) - b.prob(law) for b in blocks])
    g_tail = np.array([(1.0 if b.tail else 0.0) - b.prob(law) for b in blocks])
    F = _poisson_solution(lam, G, g_tail)

    rng = None if K <= max_exhaustive else np.random.default_rng(seed)
    window = _subset_matrix(K, n_samples, rng)
    extra_bits = len(blocks) - K
    combos = np.array(list(itertools.product((0.0, 1.0), repeat=extra_bits)))
    S = np.vstack([np.hstack([window, np.broadcast_to(c, (len(window), extra_bits))]) for c in combos])

    fA = S @ F.T  # sets x (Kc+1)
    R = _poisson_residual(lam, (S @ F.T).T, (S @ G.T).T)
    f_norm = np.max(np.abs(fA[:, 1:]), axis=1)
    df_norm = np.max(np.abs(np.diff(fA[:, 1:], axis=1)), axis=1)
    fr = f_norm / poisson_f_bound(lam)
    dr = df_norm / poisson_df_bound(lam)
    i_f, i_d = int(np.argmax(fr)), int(np.argmax(dr))
    rep = BoundReport(
        label=f"{lam!r}",
        n_sets=len(S),
        worst_f_ratio=float(fr[i_f]),
        worst_df_ratio=float(dr[i_d]),
        worst_residual=float(np.max(R)),
        worst_f_set=_describe(S[i_f], labels),
        worst_df_set=_describe(S[i_d], labels),
    )
    for i in np.flatnonzero(fr > 1 + BOUND_SLACK)[:10]:
        rep.violations.append(f"||f|| bound violated for A={_describe(S[i], labels)}")
    for i in np.flatnonzero(dr > 1 + BOUND_SLACK)[:10]:
        rep.violations.append(f"||Delta f|| bound violated for A={_describe(S[i], labels)}")
    if rep.worst_residual > SOLVER_TOL:
        rep.violations.append(f"solver residual {rep.worst_residual:.3e} above tolerance")
    return rep


# -- compound Poisson ---------------------------------------------------------


def default_cp_cutoff(spec: CompoundSpec) -> int:
    return max(cp_cutoff(spec, 1e-15), int(math.ceil(3 * spec.mean)) + 30)


def _cp_law(spec: CompoundSpec, K: int) -> Pmf:
    return cp_pmf_panjer(spec, max(K, default_cp_cutoff(spec)))


def _cp_system(spec: CompoundSpec, N: int) -> np.ndarray:
    """Stein operator rows w = 0..N on unknowns f(1..N), closed by f(w) = f(N) for w > N.

    The system is overdetermined by one row.  Keeping both the w = 0 row and
    the closure rows and solving in least squares suppresses the homogeneous
    solutions that blow up towards either end.
    """
    w_i = spec.weights
    A = np.zeros((N + 1, N))
    for w in range(N + 1):
        if w:
            A[w, w - 1] -= w
        for i, c in enumerate(w_i, start=1):
            if c:
                A[w, min(w + i, N) - 1] += c
    return A


def _cp_solution(spec: CompoundSpec, K: int, G: np.ndarray, g_tail: np.ndarray):
    """Returns f on 0..K+M and the residual on w = 0..K.

    The system is solved on a longer range so that the flat closure at the
    far end has decayed away by w = K + M.
    """
    M = spec.max_size
    N = K + M
    N_int = N + default_cp_cutoff(spec)
    A = _cp_system(spec, N_int)
    rhs = np.vstack([G, np.broadcast_to(g_tail, (N_int - K, G.shape[1]))])
    try:
        sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"compound Stein system singular for {spec}") from exc
    if not np.all(np.isfinite(sol)):
        raise NumericError(f"compound Stein system produced non-finite values for {spec}")
    f = np.vstack([np.zeros((1, G.shape[1])), sol[:N]])
    w_i = spec.weights
    res = np.zeros((K + 1, G.shape[1]))
    for w in range(K + 1):
        lhs = sum(c * f[min(w + i, N)] for i, c in enumerate(w_i, start=1)) - w * f[w]
        res[w] = lhs - G[w]
    return f, np.max(np.abs(res), axis=0)


def solve_stein_cp(spec: CompoundSpec, A: TargetSet, K: int | None = None) -> SteinTable:
    """Bounded solution of the compound Poisson Stein equation on 0..K.

    The residual covers w = 0..K and measures how far truncation has moved
    f from the bounded solution.
    """
    K = default_cp_cutoff(spec) if K is None else int(K)
    if K < 1:
        raise DomainError("cutoff K must be at least 1")
    Kc = max(K, A.cutoff + 1)
    pa = A.prob(_cp_law(spec, Kc))
    G = (A.indicator(Kc) - pa)[:, None]
    g_tail = np.array([(1.0 if A.tail else 0.0) - pa])
    f, res = _cp_solution(spec, Kc, G, g_tail)
    return SteinTable("compound", spec, A, f[: K + 1, 0], float(res[0]))


def small_theta_solution_bounds(spec: CompoundSpec) -> tuple[float, float] | None:
    """(||f||, ||Delta f||) bounds for theta < 1/2, else None."""
    th = spec.theta
    if th >= 0.5:
        return None
    lam = spec.mean
    return 1.0 / ((1 - 2 * th) * math.sqrt(lam)), 1.0 / ((1 - 2 * th) * lam)


def exp_nu_solution_bound(spec: CompoundSpec) -> float:
    lam1 = spec.rates[0]
    factor = 1.0 if lam1 <= 1 else 1.0 / lam1
    return factor * math.exp(spec.nu)


def verify_cp_solution_bounds(
    spec: CompoundSpec,
    K: int | None = None,
    *,
    window: int = 12,
    n_samples: int = 1000,
    seed: int = 0,
) -> BoundReport:
    """Check the compound solution bounds over a family of target sets.

    Every subset of ``{0..W-1}`` (W = min(K, window)) with or without the
    tail ``{k >= W}``, plus ``n_samples`` random subsets of ``{0..K}`` with
    random tail.  Ratios are reported against the theta < 1/2 bounds when
    they apply, and against (1 ^ 1/lam_1) e^nu always (in ``extra``).
    """
    K = default_cp_cutoff(spec) if K is None else int(K)
    W = min(K, window)
    law = _cp_law(spec, K)
    blocks = [TargetSet(frozenset({j}), j) for j in range(K + 1)]
    blocks.append(TargetSet(frozenset(), K, True))
    G = np.column_stack([b.indicator(K) - b.prob(law) for b in blocks])
    g_tail = np.array([(1.0 if b.tail else 0.0) - b.prob(law) for b in blocks])
    F, _ = _cp_solution(spec, K, G, g_tail)

    # exhaustive family: subsets of 0..W-1, plus optional {W..K} block and tail
    small = _subset_matrix(W, 0, None)
    rows = []
    for tail in (0.0, 1.0):
        pad = np.zeros((len(small), K + 2 - W))
        if tail:
            pad[:] = 1.0
        rows.append(np.hstack([small, pad]))
    S = np.vstack(rows)
    if n_samples:
        rng = np.random.default_rng(seed)
        S = np.vstack([S, rng.integers(0, 2, size=(n_samples, K + 2)).astype(float)])

    full = S @ F.T  # sets x (N+1), N = K + M
    GA = S @ G.T
    fA = full[:, : K + 1]
    N = K + spec.max_size
    res = np.zeros(len(S))
    for w in range(K + 1):
        lhs = sum(c * full[:, min(w + i, N)] for i, c in enumerate(spec.weights, start=1))
        res = np.maximum(res, np.abs(lhs - w * full[:, w] - GA[:, w]))

    f_norm = np.max(np.abs(fA[:, 1:]), axis=1)
    df_norm = np.max(np.abs(np.diff(fA[:, 1:], axis=1)), axis=1)
    b_exp = exp_nu_solution_bound(spec)
    rep = BoundReport(
        label=str(spec),
        n_sets=len(S),
        worst_f_ratio=float("nan"),
        worst_df_ratio=float("nan"),
        worst_residual=float(np.max(res)),
    )
    labels = [str(j) for j in range(K + 1)] + [f">{K}"]
    rexp_f, rexp_d = f_norm / b_exp, df_norm / b_exp
    rep.extra["exp_nu_f_ratio"] = float(np.max(rexp_f))
    rep.extra["exp_nu_df_ratio"] = float(np.max(rexp_d))
    rep.extra["theta"] = spec.theta
    if np.max(rexp_f) > 1 + BOUND_SLACK or np.max(rexp_d) > 1 + BOUND_SLACK:
        i = int(np.argmax(np.maximum(rexp_f, rexp_d)))
        rep.violations.append(f"(1^1/lam1)e^nu bound violated for A={_describe(S[i], labels)}")
    b7 = small_theta_solution_bounds(spec)
    if b7 is not None:
        fr, dr = f_norm / b7[0], df_norm / b7[1]
        i_f, i_d = int(np.argmax(fr)), int(np.argmax(dr))
        rep.worst_f_ratio, rep.worst_df_ratio = float(fr[i_f]), float(dr[i_d])
        rep.worst_f_set = _describe(S[i_f], labels)
        rep.worst_df_set = _describe(S[i_d], labels)
        if fr[i_f] > 1 + BOUND_SLACK:
            rep.violations.append(f"theta<1/2 ||f|| bound violated for A={rep.worst_f_set}")
        if dr[i_d] > 1 + BOUND_SLACK:
            rep.violations.append(f"theta<1/2 ||Delta f|| bound violated for A={rep.worst_df_set}")
    if rep.worst_residual > SOLVER_TOL:
        rep.violations.append(f"solver residual {rep.worst_residual:.3e} above tolerance")
    return rep


# -- Stein identity -------------------------------------------------------------


def stein_operator(f: np.ndarray, w: np.ndarray, params: float | CompoundSpec) -> np.ndarray:
    """(L f)(w) for the Poisson (float mean) or compound (CompoundSpec) operator."""
    if isinstance(params, CompoundSpec):
        out = -w * f[w]
        for i, c in enumerate(params.weights, start=1):
            out = out + c * f[w + i]
        return out
    return params * f[w + 1] - w * f[w]


def stein_identity_residual(
    P: Pmf,
    params: float | CompoundSpec,
    trials: int = 200,
    seed: int = 0,
    *,
    functions: np.ndarray | None = None,
) -> float:
    """max over random bounded f of |E (L f)(Z)|, summed exactly over the listed support.

    Test functions have f(0) = 0 and values uniform in [-1, 1].  Pass
    ``functions`` (rows = test functions on 0..end+M) to supply them directly.
    """
    M = params.max_size if isinstance(params, CompoundSpec) else 1
    w = P.support
    length = P.end + M + 1
    if functions is None:
        rng = np.random.default_rng(seed)
        functions = rng.uniform(-1.0, 1.0, size=(trials, length))
        functions[:, 0] = 0.0
    worst = 0.0
    for f in np.atleast_2d(functions):
        if len(f) < length:
            raise DomainError(f"test function must cover 0..{length - 1}")
        worst = max(worst, abs(float(np.dot(P.probs, stein_operator(f, w, params)))))
    return worst


def printed_identity_residual(P: Pmf, lam: float, f: np.ndarray) -> float:
    """|E{lam f(Z) - Z f(Z)}|, the characterisation with the shift dropped."""
    w = P.support
    return abs(float(np.dot(P.probs, lam * f[w] - w * f[w])))
