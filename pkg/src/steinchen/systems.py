"""Generators for small indicator systems with known dependence structure.

Used by the test suite and the experiment scripts to exercise the bounds on
independent, locally dependent, clustered and arbitrary joint laws.
"""

from __future__ import annotations

import numpy as np

from .bounds import IndicatorSystem
from .oracle import JointTable, mask_of

KINDS = ("independent", "window", "clustered", "mixture", "arbitrary")


def independent_system(ps) -> IndicatorSystem:
    return IndicatorSystem.independent(ps)


def window_system(rng: np.random.Generator, n: int) -> IndicatorSystem:
    """X_a = AND of a short window of i.i.d. coins (a moving-function system).

    Neighbourhoods are the indicators sharing a coin with X_a, which makes
    them exact independence blankets.
    """
    width = int(rng.integers(1, 4))
    n_coins = n + width - 1
    p = float(rng.uniform(0.2, 0.8))
    masks = [((1 << width) - 1) << a for a in range(n)]

    def fire(u: int) -> int:
        out = 0
        for a, m in enumerate(masks):
            if u & m == m:
                out |= 1 << a
        return out

    jt = JointTable.from_coins(n_coins, p, n, fire)
    nbs = [[b for b in range(n) if masks[a] & masks[b]] for a in range(n)]
    outer = [sorted({c for b in nbs[a] for c in nbs[b]}) for a in range(n)]
    return IndicatorSystem.from_joint(jt, nbs, outer)


def clustered_system(rng: np.random.Generator, n: int) -> IndicatorSystem:
    """Independent blocks; inside a block indicators are copies of a shared coin
    thinned by private coins, so they are positively related."""
    blocks = []
    a = 0
    while a < n:
        size = int(min(n - a, rng.integers(1, 4)))
        blocks.append(list(range(a, a + size)))
        a += size
    masks = np.zeros(1, dtype=np.int64)
    probs = np.ones(1)
    for blk in blocks:
        q = float(rng.uniform(0.05, 0.5))
        keep = rng.uniform(0.3, 1.0, size=len(blk))
        sub = {}
        for m in range(1 << len(blk)):
            bits = [(m >> i) & 1 for i in range(len(blk))]
            on = np.prod([k if b else 1 - k for k, b in zip(keep, bits)])
            pr = q * on + (1 - q) * (1.0 if m == 0 else 0.0)
            bm = mask_of(blk[i] for i in range(len(blk)) if bits[i])
            sub[bm] = sub.get(bm, 0.0) + pr
        bm = np.array(list(sub), dtype=np.int64)
        bp = np.array(list(sub.values()))
        masks = (masks[:, None] | bm[None, :]).ravel()
        probs = (probs[:, None] * bp[None, :]).ravel()
    jt = JointTable(n, masks, probs / probs.sum())
    nbs = [next(b for b in blocks if a in b) for a in range(n)]
    return IndicatorSystem.from_joint(jt, nbs, nbs)


def mixture_system(rng: np.random.Generator, n: int) -> IndicatorSystem:
    """Conditionally independent given a two-state latent variable."""
    w = float(rng.uniform(0.1, 0.9))
    p0 = rng.uniform(0.01, 0.4, size=n)
    p1 = rng.uniform(0.01, 0.4, size=n)
    a = JointTable.product(p0)
    b = JointTable.product(p1)
    jt = JointTable(n, np.arange(1 << n), w * a.probs + (1 - w) * b.probs)
    nbs = _random_neighbourhoods(rng, n)
    return IndicatorSystem.from_joint(jt, nbs)


def arbitrary_system(rng: np.random.Generator, n: int) -> IndicatorSystem:
    """Sparse random joint law with random neighbourhoods."""
    support = int(rng.integers(2, min(1 << n, 64) + 1))
    masks = rng.choice(1 << n, size=support, replace=False)
    # sparse low-weight masks keep the marginals small
    masks = masks & rng.integers(0, 1 << n, size=support) & rng.integers(0, 1 << n, size=support)
    probs = rng.dirichlet(np.full(support, 0.5))
    jt = JointTable(n, masks, probs)
    p = jt.marginals()
    if np.any(p <= 0) or np.any(p >= 1):
        # force every indicator to be non-degenerate by mixing in a product law
        eps = 0.05
        prod = JointTable.product(np.full(n, 0.1))
        jt = JointTable(n, np.concatenate([jt.masks, prod.masks]),
                        np.concatenate([(1 - eps) * jt.probs, eps * prod.probs]))
    return IndicatorSystem.from_joint(jt, _random_neighbourhoods(rng, n))


def _random_neighbourhoods(rng: np.random.Generator, n: int) -> list[list[int]]:
    out = []
    for a in range(n):
        extra = rng.random(n) < rng.uniform(0.0, 0.5)
        out.append(sorted({a} | set(np.flatnonzero(extra).tolist())))
    return out


def random_system(rng: np.random.Generator, n: int, kind: str | None = None) -> IndicatorSystem:
    kind = kind or KINDS[int(rng.integers(len(KINDS)))]
    if kind == "independent":
        return independent_system(rng.uniform(0.005, 0.6, size=n))
    if kind == "window":
        return window_system(rng, n)
    if kind == "clustered":
        return clustered_system(rng, n)
    if kind == "mixture":
        return mixture_system(rng, n)
    if kind == "arbitrary":
        return arbitrary_system(rng, n)
    raise ValueError(f"unknown system kind {kind!r}")


def head_run_system(n: int, t: int, p: float) -> IndicatorSystem:
    """Declumped run indicators on n coins: X_1 = Y_1..Y_t, X_i = (1 - Y_{i-1}) Y_i..Y_{i+t-1}.

    Indicators live on start positions 1..n-t+1; B_a holds the starts whose
    coin windows overlap that of a, which makes the family locally dependent.
    """
    m = n - t + 1
    run = (1 << t) - 1

    def fire(u: int) -> int:
        out = 0
        for a in range(m):
            if (u >> a) & run == run and (a == 0 or not (u >> (a - 1)) & 1):
                out |= 1 << a
        return out

    jt = JointTable.from_coins(n, p, m, fire)
    lo = [max(0, a - 1) for a in range(m)]
    hi = [a + t - 1 for a in range(m)]
    nbs = [[b for b in range(m) if lo[b] <= hi[a] and lo[a] <= hi[b]] for a in range(m)]
    outer = [sorted({c for b in nbs[a] for c in nbs[b]}) for a in range(m)]
    return IndicatorSystem.from_joint(jt, nbs, outer)
