import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from steinchen.dist import (
    CompoundSpec,
    Pmf,
    binomial_pmf,
    cp_pmf_convolution,
    cp_pmf_panjer,
    poisson_pmf,
    size_bias_transform,
    tv_distance,
)
from steinchen.errors import DomainError

# frozen from a 40-digit mpmath summation
TV_BI2_PO1 = 0.19818083824283651761


def test_poisson_examples():
    P = poisson_pmf(1, 1e-10)
    assert P.probs[0] == pytest.approx(math.exp(-1), rel=1e-14)
    assert P.probs[0] == pytest.approx(P.probs[1], rel=1e-14)
    assert poisson_pmf(2, 1e-10).probs[2] == pytest.approx(2 * math.exp(-2), rel=1e-14)
    assert P.tail_mass <= 1e-10


@pytest.mark.parametrize("lam", [0.05, 1.0, 7.5, 100.0, 2500.0, 1e4])
def test_poisson_relative_accuracy_against_mpmath(lam):
    P = poisson_pmf(lam, 1e-12)
    mp.mp.dps = 30
    ks = np.unique(np.linspace(0, P.end, 40).astype(int))
    for k in ks:
        exact = mp.e ** (-mp.mpf(lam)) * mp.mpf(lam) ** int(k) / mp.factorial(int(k))
        if exact < 1e-300:
            continue
        assert abs(P.probs[k] / float(exact) - 1) < 1e-12


@pytest.mark.parametrize("lam,tol", [(0, 1e-10), (-1, 1e-10), (1, 0), (1, 1.5), (math.inf, 1e-3)])
def test_poisson_domain(lam, tol):
    with pytest.raises(DomainError):
        poisson_pmf(lam, tol)


def test_binomial_examples():
    np.testing.assert_allclose(binomial_pmf(2, 0.5).probs, [0.25, 0.5, 0.25], rtol=1e-15)
    np.testing.assert_allclose(binomial_pmf(1, 0.3).probs, [0.7, 0.3], rtol=1e-15)
    assert binomial_pmf(4, 0.25).probs[0] == pytest.approx(0.31640625, rel=1e-14)
    assert binomial_pmf(4, 0.25).tail_mass == 0.0
    with pytest.raises(DomainError):
        binomial_pmf(3, 1.2)


def test_binomial_against_mpmath_large_n():
    n, p = 100_000, 1e-3
    B = binomial_pmf(n, p)
    mp.mp.dps = 30
    for k in (0, 50, 100, 150, 250):
        exact = mp.binomial(n, k) * mp.mpf(p) ** k * (1 - mp.mpf(p)) ** (n - k)
        assert abs(B.probs[k] / float(exact) - 1) < 1e-12


def test_pmf_validation():
    with pytest.raises(DomainError):
        Pmf(0, np.array([0.5, 0.6]))
    with pytest.raises(DomainError):
        Pmf(0, np.array([-0.1, 1.1]))
    with pytest.raises(DomainError):
        Pmf(-1, np.array([1.0]))
    P = Pmf(2, np.array([0.25, 0.75]))
    assert P[2] == 0.25 and P[0] == 0.0 and P.end == 3
    with pytest.raises(ValueError):
        P.probs[0] = 0.5


def test_pmf_csv():
    text = Pmf(1, np.array([0.5, 0.5])).to_csv()
    assert text.splitlines() == ["k,prob", "1,0.5", "2,0.5", "tail_mass,0.0"]


def test_tv_examples():
    d0, d1 = Pmf.point_mass(0), Pmf.point_mass(1)
    assert tv_distance(d0, d0).value == 0.0
    assert tv_distance(d0, d1).value == 1.0
    r = tv_distance(binomial_pmf(2, 0.5), poisson_pmf(1, 1e-15))
    assert r.value == pytest.approx(TV_BI2_PO1, abs=1e-14)
    assert r.error <= 1e-15


pmfs = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12).filter(lambda v: sum(v) > 0).map(
    lambda v: Pmf.from_array(np.array(v) / sum(v), tail_mass=0.0))


@given(pmfs, pmfs, pmfs)
def test_tv_metric_properties(P, Q, R):
    pq = tv_distance(P, Q).value
    assert 0.0 <= pq <= 1.0
    assert pq == pytest.approx(tv_distance(Q, P).value, abs=1e-15)
    assert pq <= tv_distance(P, R).value + tv_distance(R, Q).value + 1e-12


def test_size_bias_examples():
    S = size_bias_transform(binomial_pmf(2, 0.5))
    assert S.offset == 1
    np.testing.assert_allclose(S.probs, [0.5, 0.5], rtol=1e-15)
    assert size_bias_transform(Pmf.point_mass(3)).probs.tolist() == [1.0]
    with pytest.raises(DomainError):
        size_bias_transform(Pmf.point_mass(0))


@pytest.mark.parametrize("lam", [0.1, 1.0, 5.0, 20.0])
def test_poisson_is_size_bias_fixed_point(lam):
    P = poisson_pmf(lam, 1e-15)
    S = size_bias_transform(P, mean=lam)
    assert tv_distance(S, P.shift(1)).value <= 1e-14


@given(pmfs)
def test_size_bias_mean(P):
    if P.mean() == 0:
        return
    S = size_bias_transform(P)
    assert math.fsum(S.probs) + S.tail_mass == pytest.approx(1.0, abs=1e-12)
    assert S.mean() == pytest.approx(P.second_moment() / P.mean(), rel=1e-12)


def test_compound_spec_derived():
    s = CompoundSpec((1.0, 0.05))
    assert s.nu == pytest.approx(1.05)
    assert s.mean == pytest.approx(1.1)
    assert s.theta == pytest.approx(0.1 / 1.1)
    assert s.gamma.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        CompoundSpec((0.0, 0.0))
    with pytest.raises(DomainError):
        CompoundSpec((1.0, -0.1))


def test_panjer_examples():
    P = cp_pmf_panjer(CompoundSpec((0.5, 0.5)), 1)
    assert P.probs[0] == pytest.approx(math.exp(-1), rel=1e-14)
    assert P.probs[1] == pytest.approx(0.5 * math.exp(-1), rel=1e-14)
    assert P.tail_flag
    E = cp_pmf_panjer(CompoundSpec((0.0, 0.7)), 4)
    assert E.probs[1] == 0.0 and E.probs[3] == 0.0
    assert E.probs[2] == pytest.approx(0.7 * math.exp(-0.7), rel=1e-14)
    Po = poisson_pmf(1.3, 1e-15)
    np.testing.assert_allclose(cp_pmf_panjer(CompoundSpec((1.3,)), Po.end).probs, Po.probs, rtol=1e-12)


def test_convolution_examples():
    a = cp_pmf_panjer(CompoundSpec((0.5, 0.5)), 30)
    b = cp_pmf_convolution(CompoundSpec((0.5, 0.5)), 30)
    assert np.max(np.abs(a.probs - b.probs)) <= 1e-12
    np.testing.assert_allclose(cp_pmf_convolution(CompoundSpec((1.0,)), 15).probs,
                               poisson_pmf(1.0, 1e-15).probs[:16], rtol=1e-13)
    tiny = cp_pmf_convolution(CompoundSpec((1e-8, 1e-8, 1e-8)), 5)
    assert tiny.probs[0] == pytest.approx(1.0, abs=1e-6)


specs = st.integers(1, 6).flatmap(lambda M: st.tuples(
    st.floats(0.01, 5.0), st.lists(st.floats(0.0, 1.0), min_size=M, max_size=M).filter(lambda v: sum(v) > 1e-6)))


@given(specs)
def test_panjer_matches_convolution(arg):
    nu, w = arg
    spec = CompoundSpec(tuple(nu * np.array(w) / sum(w)))
    a, b = cp_pmf_panjer(spec, 60), cp_pmf_convolution(spec, 60)
    assert np.max(np.abs(a.probs - b.probs)) <= 1e-12
