"""Closed-form Poisson and compound Poisson approximation bounds.

Each bound function returns a small result object whose ``rows()`` method
yields :class:`BoundRow` records (name, value, applicability, conditions and
the method that produced it), which is what the CLI writes out.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .dist import CompoundSpec
from .errors import DomainError, InvalidStructureError, UnsupportedInputError
from .oracle import JointTable, exact_b_terms, independence_defect, mask_of, popcount

MARGINAL_SLACK = 1e-10
STRUCTURE_SLACK = 1e-10
PROHOROV_CONST = 1.0 / math.sqrt(2.0 * math.pi * math.e)


class BoundRow(NamedTuple):
    name: str
    value: float
    applicable: bool
    conditions: str
    method: str


Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class IndicatorSystem:
    """A finite family of Bernoulli indicators with dependence neighbourhoods.

    Exactly one moment source is used: a full joint table, a matrix of
    second moments E X_a X_b, or a sampler ``sampler(rng, reps)`` returning a
    ``(reps, n)`` 0/1 array.  ``outer`` holds the larger neighbourhoods
    C_a used by the compound bounds.
    """

    marginals: np.ndarray
    neighbourhoods: tuple[frozenset[int], ...]
    outer: tuple[frozenset[int], ...] | None = None
    joint: JointTable | None = None
    pairwise: np.ndarray | None = None
    sampler: Sampler | None = None
    local_dependence: bool = False
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        p = np.array(self.marginals, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "marginals", p)
        n = p.size
        if n == 0:
            raise DomainError("empty indicator system")
        if np.any(p <= 0) or np.any(p >= 1):
            raise DomainError("marginals must lie strictly between 0 and 1")
        nbs = tuple(frozenset(int(b) for b in nb) for nb in self.neighbourhoods)
        object.__setattr__(self, "neighbourhoods", nbs)
        if len(nbs) != n:
            raise DomainError("need one neighbourhood per indicator")
        for a, nb in enumerate(nbs):
            if a not in nb:
                raise DomainError(f"indicator {a} is missing from its own neighbourhood")
            if any(not 0 <= b < n for b in nb):
                raise DomainError(f"neighbourhood of {a} names unknown indicators")
        if self.outer is not None:
            outer = tuple(frozenset(int(b) for b in c) for c in self.outer)
            object.__setattr__(self, "outer", outer)
            if len(outer) != n:
                raise DomainError("need one outer neighbourhood per indicator")
            for a in range(n):
                if not nbs[a] <= outer[a]:
                    raise DomainError(f"neighbourhood of {a} is not inside its outer neighbourhood")
                if any(not 0 <= b < n for b in outer[a]):
                    raise DomainError(f"outer neighbourhood of {a} names unknown indicators")
        sources = sum(s is not None for s in (self.joint, self.pairwise, self.sampler))
        if sources > 1:
            raise DomainError("give exactly one moment source")
        if self.joint is not None:
            if self.joint.n != n:
                raise DomainError("joint table size does not match the marginals")
            if np.max(np.abs(self.joint.marginals() - p)) > MARGINAL_SLACK:
                raise DomainError("joint table marginals disagree with the declared ones")
        if self.pairwise is not None:
            S = np.array(self.pairwise, dtype=float)
            if S.shape != (n, n):
                raise DomainError("second-moment matrix has the wrong shape")
            S.setflags(write=False)
            object.__setattr__(self, "pairwise", S)

    @classmethod
    def from_joint(cls, jt: JointTable, neighbourhoods: Sequence[Iterable[int]],
                   outer: Sequence[Iterable[int]] | None = None) -> "IndicatorSystem":
        return cls(jt.marginals(), tuple(frozenset(b) for b in neighbourhoods),
                   None if outer is None else tuple(frozenset(c) for c in outer), joint=jt)

    @classmethod
    def independent(cls, ps: Sequence[float], joint: bool = True) -> "IndicatorSystem":
        n = len(ps)
        nbs = tuple(frozenset({a}) for a in range(n))
        if joint:
            return cls(ps, nbs, nbs, joint=JointTable.product(ps))
        S = np.outer(ps, ps)
        np.fill_diagonal(S, ps)
        return cls(ps, nbs, nbs, pairwise=S, local_dependence=True)

    @property
    def n(self) -> int:
        return self.marginals.size

    @property
    def lam(self) -> float:
        return math.fsum(self.marginals.tolist())

    @property
    def source(self) -> str:
        if self.joint is not None:
            return "joint"
        if self.pairwise is not None:
            return "pairwise"
        if self.sampler is not None:
            return "sampler"
        return "marginals"

    def second_moments(self) -> np.ndarray:
        if self.joint is not None:
            return self.joint.second_moments()
        if self.pairwise is not None:
            return np.asarray(self.pairwise)
        raise UnsupportedInputError("second moments need a joint table or a moment matrix")

    def with_estimated_pairwise(self, reps: int, seed: int) -> "IndicatorSystem":
        """Replace a sampler source by a Monte Carlo second-moment matrix."""
        if self.sampler is None:
            raise UnsupportedInputError("no sampler to estimate from")
        X = np.asarray(self.sampler(np.random.default_rng(seed), reps), dtype=float)
        S = X.T @ X / reps
        return IndicatorSystem(self.marginals, self.neighbourhoods, self.outer,
                               pairwise=S, local_dependence=self.local_dependence,
                               labels=self.labels)

    def local_sum(self, sets: tuple[frozenset[int], ...]) -> float:
        """sum_a sum_{b in sets[a]} p_a p_b."""
        p = self.marginals
        return math.fsum(float(p[a]) * float(p[sorted(s)].sum()) for a, s in enumerate(sets))


def _wedge_inv(x: float) -> float:
    """1 ^ 1/x, with the convention 1 ^ inf = 1."""
    return 1.0 if x <= 1.0 else 1.0 / x


@dataclass(frozen=True)
class ClassicalBounds:
    lam: float
    sum_p_sq: float
    lecam1: float
    lecam2: float | None
    stein_independent: float
    combined: float
    prohorov: float | None

    def rows(self) -> list[BoundRow]:
        return [
            BoundRow("lecam1", self.lecam1, True, "independent", "le_cam_sum_p2"),
            BoundRow("lecam2", math.nan if self.lecam2 is None else self.lecam2,
                     self.lecam2 is not None, "independent; max p <= 1/4", "le_cam_8_over_lambda"),
            BoundRow("stein_independent", self.stein_independent, True, "independent", "stein_chen_independent"),
            BoundRow("combined", self.combined, True, "independent; min of the above", "min"),
            BoundRow("prohorov", math.nan if self.prohorov is None else self.prohorov,
                     self.prohorov is not None, "equal p; leading term only, asymptotic",
                     "prohorov_leading_term"),
        ]


def classical_bounds(ps: Sequence[float]) -> ClassicalBounds:
    """Le Cam bounds, the Stein-Chen independent bound and the Prohorov leading term."""
    p = np.asarray(ps, dtype=float)
    if p.size == 0 or np.any(p <= 0) or np.any(p >= 1):
        raise DomainError("probabilities must lie strictly between 0 and 1")
    lam = math.fsum(p.tolist())
    s2 = math.fsum((p * p).tolist())
    lecam1 = s2
    lecam2 = 8.0 / lam * s2 if p.max() <= 0.25 else None
    stein_independent = _wedge_inv(lam) * s2
    combined = min(b for b in (lecam1, lecam2, stein_independent) if b is not None)
    prohorov = float(p[0]) * PROHOROV_CONST if np.all(p == p[0]) else None
    return ClassicalBounds(lam, s2, lecam1, lecam2, stein_independent, combined, prohorov)


@dataclass(frozen=True)
class LocalBounds:
    lam: float
    b1: float
    b2: float
    b3: float
    b3_source: str
    tv_bound: float
    void_bound: float

    def rows(self) -> list[BoundRow]:
        cond = f"b3 from {self.b3_source}"
        return [
            BoundRow("b1", self.b1, True, "", "local_b1"),
            BoundRow("b2", self.b2, True, "", "local_b2"),
            BoundRow("b3", self.b3, True, cond, "local_b3"),
            BoundRow("local_tv", self.tv_bound, True, cond, "local_dependence_tv"),
            BoundRow("local_void", self.void_bound, True, cond, "local_dependence_void_prob"),
        ]


def thm1_bounds(sys: IndicatorSystem) -> LocalBounds:
    """Neighbourhood bound on TV distance and on |P(W = 0) - e^{-lambda}|."""
    lam = sys.lam
    if sys.joint is None and sys.pairwise is None:
        raise UnsupportedInputError("b2 needs a joint table or a second-moment matrix")
    if sys.joint is not None:
        terms = exact_b_terms(sys.joint, [sorted(b) for b in sys.neighbourhoods])
        # b1 only needs the marginals; use the declared ones so it matches classical_bounds bit for bit
        b1, b2, b3, src = sys.local_sum(sys.neighbourhoods), terms.b2, terms.b3, "joint table"
    else:
        if not sys.local_dependence:
            raise UnsupportedInputError(
                "b3 needs conditional laws; supply a joint table or assert local dependence")
        S = sys.second_moments()
        b1 = sys.local_sum(sys.neighbourhoods)
        b2 = math.fsum(float(S[a, b]) for a, nb in enumerate(sys.neighbourhoods)
                       for b in sorted(nb) if b != a)
        b3, src = 0.0, "local dependence assertion"
    w = _wedge_inv(lam)
    tv = w * (b1 + b2) + min(1.0, 1.4 / math.sqrt(lam)) * b3
    return LocalBounds(lam, b1, b2, b3, src, tv, w * (b1 + b2 + b3))


def barbour_hall_lower(ps: Sequence[float]) -> float:
    """Lower bound (1/32)(1 ^ 1/lambda) sum p^2 for independent indicators."""
    p = np.asarray(ps, dtype=float)
    lam = math.fsum(p.tolist())
    return _wedge_inv(lam) * math.fsum((p * p).tolist()) / 32.0


def thm2_bounds(lam: float, varW: float, sum_p_sq: float, relation: str) -> float:
    """Monotone-coupling bounds; a negative value flags a failed relation hypothesis.

    The factor is (1 ^ lambda) exactly as stated for these bounds.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if varW < 0:
        raise DomainError("variance must be non-negative")
    f = min(1.0, lam)
    if relation == "negative":
        return f * (1.0 - varW / lam)
    if relation == "positive":
        return f * (varW / lam - 1.0 + 2.0 / lam * sum_p_sq)
    raise DomainError(f"relation must be 'negative' or 'positive', got {relation!r}")


def thm3_size_bias_bound(lam: float, mean_abs_gap: float) -> float:
    """(1 - e^{-lambda}) E|W + 1 - W^s|."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if mean_abs_gap < 0:
        raise DomainError("mean absolute gap must be non-negative")
    return -math.expm1(-lam) * mean_abs_gap


def _require_outer(sys: IndicatorSystem) -> tuple[frozenset[int], ...]:
    if sys.outer is None:
        raise UnsupportedInputError("compound bounds need outer neighbourhoods")
    return sys.outer


def cluster_rates(sys: IndicatorSystem) -> np.ndarray:
    """lambda_i = i^{-1} sum_a E X_a 1(Y_a = i), Y_a the count over B_a (index i-1)."""
    if sys.joint is None:
        raise UnsupportedInputError("cluster rates need the joint law")
    jt = sys.joint
    acc = np.zeros(sys.n + 1)
    for a, nb in enumerate(sys.neighbourhoods):
        xa = ((jt.masks >> a) & 1).astype(float)
        y = popcount(jt.masks & mask_of(nb))
        acc += np.bincount(y, weights=jt.probs * xa, minlength=sys.n + 1)
    i = np.arange(1, sys.n + 1)
    rates = acc[1:] / i
    last = np.flatnonzero(rates > 0)
    return rates[: last[-1] + 1] if last.size else rates[:1]


def check_two_layer_structure(sys: IndicatorSystem) -> float:
    """Largest independence defect among X_a vs outside B_a and B_a vs outside C_a."""
    outer = _require_outer(sys)
    if sys.joint is None:
        raise UnsupportedInputError("the structure check needs the joint law")
    full = (1 << sys.n) - 1
    worst = 0.0
    for a in range(sys.n):
        bm = mask_of(sys.neighbourhoods[a])
        cm = mask_of(outer[a])
        if full & ~bm:
            worst = max(worst, independence_defect(sys.joint, 1 << a, full & ~bm))
        if full & ~cm:
            worst = max(worst, independence_defect(sys.joint, bm, full & ~cm))
    return worst


@dataclass(frozen=True)
class TwoLayerBounds:
    rates: tuple[float, ...]
    nu: float
    gamma: tuple[float, ...]
    local_sum: float
    bound_i: float
    bound_ii: float | None

    @property
    def spec(self) -> CompoundSpec:
        return CompoundSpec(self.rates)

    def rows(self) -> list[BoundRow]:
        return [
            BoundRow("cp_nu", self.nu, True, "", "cluster_rates"),
            BoundRow("cp_exp_nu", self.bound_i, True, "two-layer local dependence",
                     "compound_local_exp_nu"),
            BoundRow("cp_monotone", math.nan if self.bound_ii is None else self.bound_ii,
                     self.bound_ii is not None, "i*lambda_i non-increasing",
                     "compound_local_monotone_rates"),
        ]


def _monotone_factor(l1: float, l2: float) -> float:
    x = l1 - 2.0 * l2
    if x <= 0:
        return 1.0
    return min(1.0, 1.0 / (4.0 * x * x) + max(0.0, math.log(2.0 * x)) / x)


def thm6_bounds(sys: IndicatorSystem, check: bool = True) -> TwoLayerBounds:
    """Compound Poisson bounds for two-layer locally dependent indicators."""
    outer = _require_outer(sys)
    if check:
        defect = check_two_layer_structure(sys)
        if defect > STRUCTURE_SLACK:
            raise InvalidStructureError(
                f"declared neighbourhoods are not independence blankets (defect {defect:.3g})")
    rates = cluster_rates(sys)
    nu = math.fsum(rates.tolist())
    s = sys.local_sum(outer)
    l1 = float(rates[0])
    bound_i = (1.0 if l1 <= 1 else 1.0 / l1) * math.exp(nu) * s
    w = rates * np.arange(1, rates.size + 1)
    bound_ii = None
    if np.all(np.diff(w) <= 0):
        l2 = float(rates[1]) if rates.size > 1 else 0.0
        bound_ii = 2.0 * _monotone_factor(l1, l2) * s
    return TwoLayerBounds(tuple(rates.tolist()), nu, tuple((rates / nu).tolist()), s,
                      bound_i, bound_ii)


def thm8_factor(spec: CompoundSpec) -> float | None:
    """2 (1 ^ 1/((1 - 2 theta) lambda)), or None when theta >= 1/2."""
    theta = spec.theta
    if theta >= 0.5:
        return None
    return 2.0 * _wedge_inv((1.0 - 2.0 * theta) * spec.mean)


@dataclass(frozen=True)
class SmallThetaBound:
    theta: float
    lam: float
    bound: float | None

    @property
    def applicable(self) -> bool:
        return self.bound is not None

    def rows(self) -> list[BoundRow]:
        return [
            BoundRow("cp_theta", self.theta, True, "", "cluster_rates"),
            BoundRow("cp_small_theta",
                     math.nan if self.bound is None else self.bound, self.applicable,
                     "theta < 1/2", "compound_local_small_theta"),
        ]


def thm8_bound(sys: IndicatorSystem) -> SmallThetaBound:
    outer = _require_outer(sys)
    spec = CompoundSpec(tuple(cluster_rates(sys).tolist()))
    f = thm8_factor(spec)
    bound = None if f is None else f * sys.local_sum(outer)
    return SmallThetaBound(spec.theta, spec.mean, bound)


@dataclass(frozen=True)
class MultivariateSpec:
    """Independent d-vectors; ``p[j, i]`` is the chance that vector j equals e_i."""

    p: np.ndarray = field()

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or p.size == 0:
            raise DomainError("p must be a non-empty n x d matrix")
        if np.any(p < 0):
            raise DomainError("entries must be non-negative")
        if np.any(p.sum(axis=1) >= 1):
            raise DomainError("each row must sum to less than 1")
        if not p.sum() > 0:
            raise DomainError("lambda must be positive")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def lam(self) -> float:
        return float(self.p.sum())

    @property
    def mu(self) -> np.ndarray:
        return self.p.sum(axis=0) / self.lam


@dataclass(frozen=True)
class MultivariateBounds:
    barbour88: float
    roos99: float
    capped: tuple[float, float]

    def rows(self) -> list[BoundRow]:
        return [
            BoundRow("mv_log_factor", self.barbour88, True, "raw", "multivariate_c_lambda"),
            BoundRow("mv_log_factor_capped", self.capped[0], True, "min(raw, 1)",
                     "multivariate_c_lambda"),
            BoundRow("mv_generating_fn", self.roos99, True, "raw", "multivariate_8_8"),
            BoundRow("mv_generating_fn_capped", self.capped[1], True, "min(raw, 1)",
                     "multivariate_8_8"),
        ]


def multivariate_bounds(spec: MultivariateSpec) -> MultivariateBounds:
    p, lam, mu = spec.p, spec.lam, spec.mu
    pj = p.sum(axis=1)
    live = mu > 0
    inner = (p[:, live] ** 2 / mu[live]).sum(axis=1) / lam
    c = 0.5 + max(0.0, math.log(2.0 * lam))
    b88 = math.fsum(np.minimum(pj ** 2, c * inner).tolist())
    r99 = 8.8 * math.fsum(np.minimum(pj ** 2, inner).tolist())
    return MultivariateBounds(b88, r99, (min(b88, 1.0), min(r99, 1.0)))


def load_system(path: str | Path) -> IndicatorSystem:
    """Read a system description from JSON.

    Keys: ``marginals`` (list), ``neighbourhoods`` (list of lists), optional
    ``outer``, ``indices`` (labels), ``joint`` (list of [bitmask, prob]),
    ``pairwise`` (matrix) and ``local_dependence`` (bool).  Missing
    ``marginals`` are derived from ``joint``.
    """
    data = json.loads(Path(path).read_text())
    return system_from_dict(data)


def system_from_dict(data: dict) -> IndicatorSystem:
    if not isinstance(data, dict):
        raise DomainError("system description must be a JSON object")
    unknown = set(data) - {"indices", "marginals", "neighbourhoods", "outer", "joint",
                           "pairwise", "local_dependence"}
    if unknown:
        raise DomainError(f"unknown keys in system description: {sorted(unknown)}")
    labels = data.get("indices")
    joint = None
    if "joint" in data:
        n = len(data.get("marginals") or labels or data["neighbourhoods"])
        joint = JointTable.from_outcomes(n, [(int(m), float(q)) for m, q in data["joint"]])
    ps = data.get("marginals")
    if ps is None:
        if joint is None:
            raise DomainError("marginals are required without a joint table")
        ps = joint.marginals()
    if "neighbourhoods" not in data:
        raise DomainError("neighbourhoods are required")
    return IndicatorSystem(
        ps,
        tuple(frozenset(b) for b in data["neighbourhoods"]),
        None if data.get("outer") is None else tuple(frozenset(c) for c in data["outer"]),
        joint=joint,
        pairwise=None if data.get("pairwise") is None else np.asarray(data["pairwise"], float),
        local_dependence=bool(data.get("local_dependence", False)),
        labels=None if labels is None else tuple(str(x) for x in labels),
    )


def system_to_dict(sys: IndicatorSystem) -> dict:
    out: dict = {
        "marginals": sys.marginals.tolist(),
        "neighbourhoods": [sorted(b) for b in sys.neighbourhoods],
    }
    if sys.labels is not None:
        out["indices"] = list(sys.labels)
    if sys.outer is not None:
        out["outer"] = [sorted(c) for c in sys.outer]
    if sys.joint is not None:
        out["joint"] = [[int(m), float(q)] for m, q in zip(sys.joint.masks, sys.joint.probs)]
    if sys.pairwise is not None:
        out["pairwise"] = np.asarray(sys.pairwise).tolist()
    if sys.local_dependence:
        out["local_dependence"] = True
    return out
