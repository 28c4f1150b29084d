"""Discrete distribution kernels on the non-negative integers.

Everything here returns a :class:`Pmf`, a truncated mass function that keeps
track of the probability it does not list explicitly.  Poisson and binomial
masses use Loader's saddle-point evaluation (``stirlerr``/``bd0``), which stays
accurate to a few ulps in relative terms far beyond the range where the naive
``exp(k log(lam) - lam - lgamma(k+1))`` loses digits to cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import special

from .errors import DomainError

LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
NORMALIZATION_SLACK = 1e-12

# Series coefficients of the Stirling remainder, 1/12, 1/360, 1/1260, ...
_S0, _S1, _S2, _S3, _S4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188


def stirlerr(n: np.ndarray | float) -> np.ndarray:
    """log(n!) - log(sqrt(2 pi n) (n/e)^n) for n >= 1."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n <= 15
    ns = n[small]
    out[small] = special.gammaln(ns + 1) - (ns + 0.5) * np.log(ns) + ns - LN_SQRT_2PI
    nl = n[~small]
    nn = nl * nl
    out[~small] = (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / nl
    return out


def bd0(x: np.ndarray | float, m: np.ndarray | float) -> np.ndarray:
    """Deviance term x log(x/m) + m - x, evaluated without cancellation."""
    x, m = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(m, dtype=float))
    d = x - m
    s = x + m
    with np.errstate(over="ignore", divide="ignore"):
        ratio = np.where(x > 0, x, 1.0) / m
        out = special.xlogy(x, ratio) + m - x
        # the ratio overflows for tiny m; split the logarithm there instead
        big = ~np.isfinite(ratio) & (x > 0)
    if np.any(big):
        out[big] = x[big] * (np.log(x[big]) - np.log(m[big])) + m[big] - x[big]
    near = np.abs(d) < 0.1 * s
    if np.any(near):
        v = d[near] / s[near]
        res = d[near] * v
        ej = 2.0 * x[near] * v
        v2 = v * v
        # |v| < 0.1, so 20 terms are far past double precision
        for j in range(1, 21):
            ej = ej * v2
            res = res + ej / (2 * j + 1)
        out[near] = res
    return out


def poisson_logpmf(k: np.ndarray, lam: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    lam = float(lam)
    out = np.full(k.shape, -lam)
    pos = k > 0
    kp = k[pos]
    out[pos] = -stirlerr(kp) - bd0(kp, lam) - 0.5 * np.log(2.0 * math.pi * kp)
    return out


def binomial_logpmf(k: np.ndarray, n: int, p: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    q = 1.0 - p
    if p == 0.0:
        return np.where(k == 0, 0.0, -np.inf)
    if p == 1.0:
        return np.where(k == n, 0.0, -np.inf)
    out = np.empty(k.shape)
    out[k == 0] = n * math.log1p(-p)
    out[k == n] = n * math.log(p)
    mid = (k > 0) & (k < n)
    x = k[mid]
    lc = (
        stirlerr(float(n))
        - stirlerr(x)
        - stirlerr(n - x)
        - bd0(x, n * p)
        - bd0(n - x, n * q)
    )
    lf = math.log(2.0 * math.pi) + np.log(x) + np.log1p(-x / n)
    out[mid] = lc - 0.5 * lf
    return out


@dataclass(frozen=True, eq=False)
class Pmf:
    """Truncated probability mass function.

    ``probs[j]`` is the mass at ``offset + j``; ``tail_mass`` is the mass the
    table does not list (always located above the listed range for the
    constructors in this module).  ``tail_flag`` is an advisory marker set when
    a constructor could not keep the tail below the caller's tolerance.
    """

    offset: int
    probs: np.ndarray
    tail_mass: float = 0.0
    tail_flag: bool = False

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "tail_mass", float(self.tail_mass))
        if self.offset < 0:
            raise DomainError("offset must be non-negative")
        if probs.ndim != 1:
            raise DomainError("probs must be one-dimensional")
        if np.any(probs < 0) or np.any(probs > 1):
            raise DomainError("pmf entries must lie in [0, 1]")
        if self.tail_mass < 0:
            raise DomainError("tail mass must be non-negative")
        total = float(probs.sum()) + self.tail_mass
        if abs(total - 1.0) > NORMALIZATION_SLACK:
            raise DomainError(f"pmf not normalised: mass + tail = {total!r}")

    @classmethod
    def from_array(cls, probs, offset: int = 0, tail_mass: float | None = None, **kw) -> "Pmf":
        probs = np.asarray(probs, dtype=float)
        if tail_mass is None:
            tail_mass = max(0.0, 1.0 - float(probs.sum()))
        return cls(offset, probs, tail_mass, **kw)

    @classmethod
    def point_mass(cls, k: int) -> "Pmf":
        return cls(k, np.array([1.0]))

    def __len__(self) -> int:
        return len(self.probs)

    @property
    def end(self) -> int:
        """Largest listed support point."""
        return self.offset + len(self.probs) - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.end + 1)

    def __getitem__(self, k: int) -> float:
        j = k - self.offset
        if 0 <= j < len(self.probs):
            return float(self.probs[j])
        return 0.0

    def dense(self, upto: int | None = None) -> np.ndarray:
        """Masses on ``0..upto`` (zero-filled, silently truncating listed mass)."""
        upto = self.end if upto is None else upto
        out = np.zeros(upto + 1)
        hi = min(self.end, upto)
        if hi >= self.offset:
            out[self.offset : hi + 1] = self.probs[: hi - self.offset + 1]
        return out

    def mean(self) -> float:
        """Mean of the listed part only."""
        return float(np.dot(self.support, self.probs))

    def second_moment(self) -> float:
        k = self.support.astype(float)
        return float(np.dot(k * k, self.probs))

    def shift(self, m: int) -> "Pmf":
        return Pmf(self.offset + m, self.probs, self.tail_mass, self.tail_flag)

    def to_csv(self) -> str:
        lines = ["k,prob"]
        lines += [f"{k},{p!r}" for k, p in zip(self.support.tolist(), self.probs.tolist())]
        lines.append(f"tail_mass,{self.tail_mass!r}")
        return "\n".join(lines) + "\n"


def poisson_cutoff(lam: float, tol: float) -> int:
    """Smallest k > lam whose Chernoff bound e^{-lam} (e lam / k)^k is <= tol.

    The Chernoff bound dominates P(Z >= k), so truncating to ``0..k-1`` leaves
    at most ``tol`` unlisted.
    """
    log_tol = math.log(tol)
    lo = math.floor(lam) + 1
    width = int(60 * math.sqrt(lam) + 60 - log_tol)
    while True:
        ks = np.arange(lo, lo + width, dtype=float)
        bound = -lam + ks * (1.0 + math.log(lam) - np.log(ks))
        hit = np.flatnonzero(bound <= log_tol)
        if hit.size:
            return int(ks[hit[0]])
        lo += width


def poisson_pmf(lam: float, tol: float = 1e-14) -> Pmf:
    """Poisson(lam) truncated so that the unlisted upper tail is at most ``tol``."""
    lam = float(lam)
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError(f"Poisson mean must be positive and finite, got {lam!r}")
    if not 0 < tol < 1:
        raise DomainError(f"tolerance must lie in (0, 1), got {tol!r}")
    cut = poisson_cutoff(lam, tol)
    ks = np.arange(cut)
    probs = np.exp(poisson_logpmf(ks, lam))
    tail = float(special.pdtrc(cut - 1, lam))
    # Round-off in the listed masses must not break the normalisation check.
    tail = max(tail, 0.0)
    return Pmf(0, probs, tail)


def poisson_terms(lam: float, kmax: int) -> np.ndarray:
    """Poisson masses on ``0..kmax`` with no tolerance logic; lam = 0 is allowed."""
    if lam == 0:
        out = np.zeros(kmax + 1)
        out[0] = 1.0
        return out
    return np.exp(poisson_logpmf(np.arange(kmax + 1), lam))


def binomial_pmf(n: int, p: float) -> Pmf:
    if int(n) != n or n < 1:
        raise DomainError(f"binomial size must be a positive integer, got {n!r}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"success probability must lie in [0, 1], got {p!r}")
    n = int(n)
    probs = np.exp(binomial_logpmf(np.arange(n + 1), n, p))
    return Pmf(0, probs, 0.0)


class TVResult(NamedTuple):
    value: float
    error: float

    def __float__(self) -> float:
        return self.value


def tv_distance(P: Pmf, Q: Pmf) -> TVResult:
    """Total variation distance, half the l1 distance between the mass functions.

    Listed masses are compared entrywise over the union of supports, and the
    unlisted tails contribute ``|tail_P - tail_Q| / 2``, which is exact when
    both tails sit beyond the union of listed supports.  ``error`` bounds the
    effect of not knowing where the tail mass actually lives.
    """
    hi = max(P.end, Q.end)
    diff = np.abs(P.dense(hi) - Q.dense(hi))
    value = 0.5 * float(diff.sum()) + 0.5 * abs(P.tail_mass - Q.tail_mass)
    value = min(max(value, 0.0), 1.0)
    return TVResult(value, 0.5 * (P.tail_mass + Q.tail_mass))


def size_bias_transform(P: Pmf, mean: float | None = None) -> Pmf:
    """Size-biased law k P{k} / E W.

    For a truncated input pass the exact ``mean`` when it is known; the
    listed-part mean is used otherwise, which renormalises the listed masses.
    """
    m = P.mean() if mean is None else float(mean)
    if not m > 0:
        raise DomainError("size biasing needs a strictly positive mean")
    k = P.support
    probs = k * P.probs / m
    start = max(P.offset, 1)
    probs = probs[start - P.offset :]
    if probs.size == 0:
        raise DomainError("size biasing needs mass away from zero")
    return Pmf.from_array(probs, offset=start)


@dataclass(frozen=True)
class CompoundSpec:
    """Generating measure of CP(nu gamma) given by cluster-size rates.

    ``rates[i-1]`` is the rate of clusters of size ``i``.
    """

    rates: tuple[float, ...] = field()

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        if not rates:
            raise DomainError("at least one cluster size is required")
        if any(r < 0 or not math.isfinite(r) for r in rates):
            raise DomainError("cluster rates must be finite and non-negative")
        if not self.nu > 0:
            raise DomainError("total cluster rate nu must be positive")

    @classmethod
    def poisson(cls, lam: float) -> "CompoundSpec":
        return cls((lam,))

    @property
    def max_size(self) -> int:
        return len(self.rates)

    @property
    def weights(self) -> np.ndarray:
        """i * lambda_i, indexed from i = 1."""
        return np.arange(1, self.max_size + 1) * np.asarray(self.rates)

    @property
    def nu(self) -> float:
        return math.fsum(self.rates)

    @property
    def mean(self) -> float:
        return math.fsum(self.weights.tolist())

    @property
    def gamma(self) -> np.ndarray:
        return np.asarray(self.rates) / self.nu

    @property
    def theta(self) -> float:
        i = np.arange(1, self.max_size + 1)
        return float(np.dot(i * (i - 1), self.rates)) / self.mean

    def __str__(self) -> str:
        return "CP(" + ";".join(repr(r) for r in self.rates) + ")"


def cp_cutoff(spec: CompoundSpec, tol: float) -> int:
    """Smallest k whose Chernoff bound on P(Z >= k) is <= tol."""
    i = np.arange(1, spec.max_size + 1)
    rates = np.asarray(spec.rates)
    log_tol = math.log(tol)
    thetas = np.linspace(1e-3, 5.0, 2000)
    log_mgf = (rates[None, :] * np.expm1(np.outer(thetas, i))).sum(axis=1)
    k = max(1, math.ceil(spec.mean))
    while True:
        if np.min(log_mgf - thetas * k) <= log_tol:
            return k
        k += 1


def cp_pmf_panjer(spec: CompoundSpec, K: int, tol: float = 1e-12) -> Pmf:
    """CP(nu gamma) on ``0..K`` by the Panjer recursion.

    P(0) = e^{-nu},  P(n) = (1/n) sum_{i<=min(n,M)} i lambda_i P(n-i).
    """
    if K < 0:
        raise DomainError("cutoff K must be non-negative")
    if spec.nu > 700:
        raise DomainError("nu too large: e^{-nu} underflows")
    w = spec.weights
    M = spec.max_size
    P = np.zeros(K + 1)
    P[0] = math.exp(-spec.nu)
    for n in range(1, K + 1):
        m = min(n, M)
        P[n] = float(np.dot(w[:m], P[n - 1 :: -1][:m])) / n
    tail = max(0.0, 1.0 - math.fsum(P.tolist()))
    return Pmf(0, P, tail, tail_flag=tail > tol)


def cp_pmf_convolution(spec: CompoundSpec, K: int) -> Pmf:
    """CP(nu gamma) on ``0..K`` as the law of sum_i i Z_i with Z_i ~ Po(lambda_i)."""
    if K < 0:
        raise DomainError("cutoff K must be non-negative")
    out = np.zeros(K + 1)
    out[0] = 1.0
    for i, rate in enumerate(spec.rates, start=1):
        if rate == 0:
            continue
        comp = np.zeros(K + 1)
        comp[::i] = poisson_terms(rate, K // i)
        out = np.convolve(out, comp)[: K + 1]
    tail = max(0.0, 1.0 - math.fsum(out.tolist()))
    return Pmf(0, out, tail)


def as_pmf(values: Sequence[float], offset: int = 0) -> Pmf:
    return Pmf.from_array(values, offset=offset)
