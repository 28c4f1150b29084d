"""Brute-force ground truth for small Bernoulli systems.

A system of ``n`` indicators is represented by its joint law over bitmask
outcomes: bit ``a`` of an outcome is the value of indicator ``a``.  All
quantities here are computed by exact enumeration of that law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .dist import Pmf, TVResult, poisson_pmf, poisson_terms, size_bias_transform, tv_distance
from .errors import DomainError, SizeError

MAX_DENSE = 25
MAX_CONDITIONAL = 20
SUM_SLACK = 1e-12


def popcount(masks: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(masks, dtype=np.int64)).astype(np.int64)


def bits_of(masks: np.ndarray, n: int) -> np.ndarray:
    """Outcome-by-indicator 0/1 matrix."""
    return ((np.asarray(masks, dtype=np.int64)[:, None] >> np.arange(n)) & 1).astype(float)


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << int(i)
    return m


@dataclass(frozen=True, eq=False)
class JointTable:
    """Joint law of ``n`` indicators as a sparse list of (bitmask, probability).

    Masks are stored sorted and unique; zero-probability outcomes are dropped.
    """

    n: int
    masks: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise DomainError("a joint table needs at least one indicator")
        if n > MAX_DENSE:
            raise SizeError(f"joint tables are limited to {MAX_DENSE} indicators, got {n}")
        masks = np.asarray(self.masks, dtype=np.int64).ravel()
        probs = np.asarray(self.probs, dtype=float).ravel()
        if masks.shape != probs.shape:
            raise DomainError("masks and probs must have the same length")
        if np.any(masks < 0) or np.any(masks >= (1 << n)):
            raise DomainError(f"outcome masks must lie in [0, 2^{n})")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise DomainError("outcome probabilities must be finite and non-negative")
        total = math.fsum(probs.tolist())
        if abs(total - 1.0) > SUM_SLACK:
            raise DomainError(f"joint table sums to {total!r}, not 1")
        uniq, inv = np.unique(masks, return_inverse=True)
        merged = np.bincount(inv, weights=probs, minlength=uniq.size)
        keep = merged > 0
        uniq, merged = uniq[keep], merged[keep]
        uniq.setflags(write=False)
        merged.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "masks", uniq)
        object.__setattr__(self, "probs", merged)

    @classmethod
    def from_outcomes(cls, n: int, outcomes: Iterable[tuple[int, float]]) -> "JointTable":
        pairs = list(outcomes)
        if not pairs:
            raise DomainError("no outcomes given")
        masks, probs = zip(*pairs)
        return cls(n, np.array(masks, dtype=np.int64), np.array(probs, dtype=float))

    @classmethod
    def dense(cls, probs: Sequence[float]) -> "JointTable":
        probs = np.asarray(probs, dtype=float)
        n = int(round(math.log2(probs.size)))
        if probs.size != 1 << n:
            raise DomainError("a dense table needs 2^n entries")
        return cls(n, np.arange(probs.size, dtype=np.int64), probs)

    @classmethod
    def product(cls, ps: Sequence[float]) -> "JointTable":
        """Independent indicators with the given marginals."""
        ps = np.asarray(ps, dtype=float)
        n = ps.size
        if n > MAX_DENSE:
            raise SizeError(f"joint tables are limited to {MAX_DENSE} indicators, got {n}")
        probs = np.ones(1)
        for p in ps:
            # outcome index bit a is indicator a, so new bits go to the top
            probs = np.concatenate([probs * (1.0 - p), probs * p])
        return cls(n, np.arange(1 << n, dtype=np.int64), probs)

    @classmethod
    def from_function(cls, n_bits: int, n: int, weight: Callable[[int], float],
                      indicators: Callable[[int], int]) -> "JointTable":
        """Push forward a law on ``n_bits`` underlying coins to ``n`` indicators.

        ``weight(u)`` is the probability of the underlying outcome ``u`` and
        ``indicators(u)`` is the bitmask of indicators that fire on it.
        """
        if n_bits > MAX_DENSE:
            raise SizeError(f"at most {MAX_DENSE} underlying coins can be enumerated")
        us = range(1 << n_bits)
        return cls(n, np.fromiter((indicators(u) for u in us), np.int64, 1 << n_bits),
                   np.fromiter((weight(u) for u in us), float, 1 << n_bits))

    @classmethod
    def from_coins(cls, n_bits: int, p: float, n: int,
                   indicators: Callable[[int], int]) -> "JointTable":
        """Indicators driven by ``n_bits`` i.i.d. Bernoulli(p) coins."""
        us = np.arange(1 << n_bits, dtype=np.int64)
        k = popcount(us)
        w = np.exp(k * math.log(p) + (n_bits - k) * math.log1p(-p)) if 0 < p < 1 else (
            (k == n_bits).astype(float) if p == 1 else (k == 0).astype(float))
        return cls(n, np.fromiter((indicators(int(u)) for u in us), np.int64, us.size), w)

    def marginals(self) -> np.ndarray:
        return self.probs @ bits_of(self.masks, self.n)

    def second_moments(self) -> np.ndarray:
        """Matrix of E X_a X_b (diagonal holds the marginals)."""
        B = bits_of(self.masks, self.n)
        return B.T @ (B * self.probs[:, None])

    def lam(self) -> float:
        return float(np.dot(popcount(self.masks), self.probs))

    def conditioned_on(self, a: int) -> "JointTable":
        """Law given X_a = 1."""
        sel = (self.masks >> a) & 1 == 1
        mass = math.fsum(self.probs[sel].tolist())
        if mass <= 0:
            raise DomainError(f"indicator {a} never fires")
        return JointTable(self.n, self.masks[sel], self.probs[sel] / mass)


def _require(jt: JointTable, cap: int) -> None:
    if jt.n > cap:
        raise SizeError(f"exact computation limited to {cap} indicators, got {jt.n}")


def law_of_W(jt: JointTable) -> Pmf:
    _require(jt, MAX_DENSE)
    probs = np.bincount(popcount(jt.masks), weights=jt.probs, minlength=jt.n + 1)
    return Pmf(0, np.clip(probs, 0.0, 1.0), 0.0)


def exact_variance(jt: JointTable) -> float:
    law = law_of_W(jt)
    k = law.support.astype(float)
    m = float(np.dot(k, law.probs))
    return float(np.dot((k - m) ** 2, law.probs))


def exact_tv_to_poisson(jt: JointTable, tol: float = 1e-14) -> TVResult:
    lam = jt.lam()
    if not lam > 0:
        raise DomainError("E W = 0: no Poisson law to compare against")
    return tv_distance(law_of_W(jt), poisson_pmf(lam, tol))


@dataclass(frozen=True)
class BTerms:
    b1: float
    b2: float
    b3: float


def _grouped_bias(jt: JointTable, a: int, keep_mask: int) -> float:
    """sum_g |P(X_a = 1, g) - p_a P(g)| over configurations g of the kept bits."""
    keys = jt.masks & keep_mask
    _, inv = np.unique(keys, return_inverse=True)
    pg = np.bincount(inv, weights=jt.probs)
    xa = ((jt.masks >> a) & 1).astype(float)
    pg1 = np.bincount(inv, weights=jt.probs * xa)
    pa = float(pg1.sum())
    return float(np.abs(pg1 - pa * pg).sum())


def exact_b_terms(jt: JointTable, neighbourhoods: Sequence[Iterable[int]]) -> BTerms:
    """b1, b2 and b3 of the local bound; b3 uses the expected absolute bias."""
    _require(jt, MAX_CONDITIONAL)
    if len(neighbourhoods) != jt.n:
        raise DomainError("need one neighbourhood per indicator")
    p = jt.marginals()
    S = jt.second_moments()
    full = (1 << jt.n) - 1
    b1 = b2 = b3 = 0.0
    for a, nb in enumerate(neighbourhoods):
        nb = sorted(set(int(b) for b in nb))
        b1 += float(p[a]) * float(p[nb].sum())
        b2 += float(sum(S[a, b] for b in nb if b != a))
        b3 += _grouped_bias(jt, a, full & ~mask_of(nb))
    return BTerms(b1, b2, b3)


def _prefix_tables(jt: JointTable) -> list[np.ndarray]:
    """tables[j][x] = P(X_0..X_{j-1} = x) for every prefix length j."""
    return [np.bincount(jt.masks & ((1 << j) - 1), weights=jt.probs, minlength=1 << j)
            for j in range(jt.n + 1)]


def _quantile_coupling(tx: list[np.ndarray], ty: list[np.ndarray], n: int):
    """Couple two laws on {0,1}^n coordinate by coordinate with shared uniforms.

    Coordinate j of each vector is 1 iff U_j <= P(bit j = 1 | earlier bits).
    Returns (xmasks, ymasks, probs) listing the coupled law exactly.
    """
    xs = np.zeros(1, dtype=np.int64)
    ys = np.zeros(1, dtype=np.int64)
    ps = np.ones(1)
    for j in range(n):
        bit = np.int64(1 << j)
        with np.errstate(invalid="ignore", divide="ignore"):
            a = np.where(tx[j][xs] > 0, tx[j + 1][xs | bit] / tx[j][xs], 0.0)
            b = np.where(ty[j][ys] > 0, ty[j + 1][ys | bit] / ty[j][ys], 0.0)
        a = np.clip(a, 0.0, 1.0)
        b = np.clip(b, 0.0, 1.0)
        branches = (
            (bit, bit, np.minimum(a, b)),
            (bit, 0, np.maximum(a - b, 0.0)),
            (0, bit, np.maximum(b - a, 0.0)),
            (0, 0, 1.0 - np.maximum(a, b)),
        )
        nx = np.concatenate([xs | dx for dx, _, _ in branches])
        ny = np.concatenate([ys | dy for _, dy, _ in branches])
        npr = np.concatenate([ps * w for _, _, w in branches])
        keep = npr > 0
        xs, ys, ps = nx[keep], ny[keep], npr[keep]
    return xs, ys, ps


@dataclass(frozen=True)
class SizeBiasGap:
    gap_eq13: float
    dist_Ws: Pmf
    coupled_Ws: Pmf


def exact_size_bias_gap(jt: JointTable) -> SizeBiasGap:
    """Exact E|W + 1 - W^s| under the index-mixture size-bias coupling.

    I is drawn with P(I = a) = p_a / lam.  Given I = a, the vector X and a
    vector Y distributed as X conditioned on X_a = 1 are coupled by
    conditional quantiles with shared uniforms in index order, and
    W^s = sum Y = V_a + 1.
    """
    _require(jt, MAX_CONDITIONAL)
    lam = jt.lam()
    if not lam > 0:
        raise DomainError("E W = 0: size biasing is undefined")
    p = jt.marginals()
    tx = _prefix_tables(jt)
    gap = 0.0
    ws = np.zeros(jt.n + 1)
    for a in range(jt.n):
        if p[a] <= 0:
            continue
        ty = _prefix_tables(jt.conditioned_on(a))
        xs, ys, ps = _quantile_coupling(tx, ty, jt.n)
        w, v = popcount(xs), popcount(ys)
        weight = p[a] / lam
        gap += float(weight) * float(np.dot(np.abs(w + 1 - v), ps))
        ws += weight * np.bincount(v, weights=ps, minlength=jt.n + 1)
    law = law_of_W(jt)
    return SizeBiasGap(
        gap,
        size_bias_transform(law, mean=lam),
        Pmf.from_array(np.clip(ws[1:], 0.0, 1.0), offset=1),
    )


def independence_defect(jt: JointTable, left: int, right: int) -> float:
    """sum |P(L = l, R = r) - P(L = l) P(R = r)| for two disjoint bit blocks."""
    if left & right:
        raise DomainError("blocks must be disjoint")
    lk = jt.masks & left
    rk = jt.masks & right
    _, li = np.unique(lk, return_inverse=True)
    _, ri = np.unique(rk, return_inverse=True)
    nr = int(ri.max()) + 1
    joint = np.bincount(li * nr + ri, weights=jt.probs, minlength=(int(li.max()) + 1) * nr)
    joint = joint.reshape(-1, nr)
    return float(np.abs(joint - np.outer(joint.sum(1), joint.sum(0))).sum())


def multivariate_law(pmat: np.ndarray) -> np.ndarray:
    """Exact law of the sum of independent categorical d-vectors on {0..n}^d.

    Row j of ``pmat`` gives P(X_j = e_i) for i = 1..d; the remaining mass is
    on the zero vector.
    """
    pmat = np.asarray(pmat, dtype=float)
    n, d = pmat.shape
    shape = (n + 1,) * d
    law = np.zeros(shape)
    law[(0,) * d] = 1.0
    for j in range(n):
        new = law * (1.0 - pmat[j].sum())
        for i in range(d):
            shifted = np.zeros(shape)
            src = [slice(None)] * d
            dst = [slice(None)] * d
            src[i] = slice(0, n)
            dst[i] = slice(1, n + 1)
            shifted[tuple(dst)] = law[tuple(src)]
            new += pmat[j, i] * shifted
        law = new
    return law


def exact_multivariate_tv(pmat: np.ndarray) -> float:
    """TV distance between the sum of categorical vectors and its Poisson product law."""
    pmat = np.asarray(pmat, dtype=float)
    n, d = pmat.shape
    if (n + 1) ** d > 1 << 22:
        raise SizeError("multivariate grid too large to enumerate")
    law = multivariate_law(pmat)
    q = np.ones((1,) * d)
    for i in range(d):
        marg = poisson_terms(float(pmat[:, i].sum()), n)
        shape = [1] * d
        shape[i] = n + 1
        q = q * marg.reshape(shape)
    outside = max(0.0, 1.0 - math.fsum(q.ravel().tolist()))
    return 0.5 * float(np.abs(law - q).sum()) + 0.5 * outside
