import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from steinchen.dist import binomial_pmf
from steinchen.errors import DomainError, SizeError
from steinchen.oracle import (
    JointTable,
    exact_b_terms,
    exact_size_bias_gap,
    exact_tv_to_poisson,
    exact_variance,
    independence_defect,
    law_of_W,
    mask_of,
)
from steinchen.systems import head_run_system, random_system

TV_INDEP_QUARTER_4 = 0.080993338242836517607  # mpmath, 40 digits
TV_BI2_PO1 = 0.19818083824283651761


def correlated_pair(p=0.3):
    return JointTable.from_outcomes(2, [(0b00, 1 - p), (0b11, p)])


probs01 = st.floats(0.0, 1.0)
marginal_lists = st.lists(st.floats(0.001, 0.999), min_size=1, max_size=8)


def test_law_of_w_examples():
    assert np.allclose(law_of_W(JointTable.product([0.5, 0.5])).probs, [0.25, 0.5, 0.25])
    hr = law_of_W(head_run_system(3, 2, 0.5).joint).dense(2)
    assert np.allclose(hr, [5 / 8, 3 / 8, 0.0], atol=1e-15)
    assert np.allclose(law_of_W(correlated_pair()).dense(2), [0.7, 0.0, 0.3])


def test_law_of_w_size_cap():
    with pytest.raises(SizeError):
        JointTable(26, [0], [1.0])


def test_table_validation():
    with pytest.raises(DomainError):
        JointTable(2, [0, 1], [0.5, 0.4])
    with pytest.raises(DomainError):
        JointTable(2, [0, 4], [0.5, 0.5])
    with pytest.raises(DomainError):
        JointTable(2, [0, 1], [1.5, -0.5])


def test_tv_examples():
    v = exact_tv_to_poisson(JointTable.product([0.25] * 4)).value
    assert 0.0078125 <= v <= 0.25
    assert v == pytest.approx(TV_INDEP_QUARTER_4, abs=1e-13)
    assert exact_tv_to_poisson(JointTable.product([0.5, 0.5])).value == pytest.approx(TV_BI2_PO1, abs=1e-13)
    with pytest.raises(DomainError):
        exact_tv_to_poisson(JointTable(3, [0], [1.0]))


def test_b_terms_examples():
    ps = [0.1, 0.2, 0.3]
    b = exact_b_terms(JointTable.product(ps), [[0], [1], [2]])
    assert b.b1 == pytest.approx(sum(p * p for p in ps), abs=1e-15)
    assert b.b2 == 0.0 and b.b3 == pytest.approx(0.0, abs=1e-15)
    b = exact_b_terms(correlated_pair(), [[0], [1]])
    assert b.b3 == pytest.approx(0.84, abs=1e-14)
    # a window system's neighbourhoods are exact independence blankets
    sys = random_system(np.random.default_rng(3), 6, "window")
    assert exact_b_terms(sys.joint, sys.neighbourhoods).b3 == pytest.approx(0.0, abs=1e-14)


def test_b_terms_full_neighbourhood_kills_b3():
    jt = JointTable.product([0.2, 0.4, 0.6])
    assert exact_b_terms(jt, [[0, 1, 2]] * 3).b3 == pytest.approx(0.0, abs=1e-15)


def test_size_bias_examples():
    ps = np.array([0.1, 0.25, 0.4])
    g = exact_size_bias_gap(JointTable.product(ps))
    assert g.gap_eq13 == pytest.approx(float((ps ** 2).sum() / ps.sum()), abs=1e-14)
    assert exact_size_bias_gap(JointTable.product([0.37])).gap_eq13 == pytest.approx(0.37, abs=1e-15)
    ws = exact_size_bias_gap(JointTable.product([0.5, 0.5])).dist_Ws
    assert ws.offset == 1 and np.allclose(ws.probs, [0.5, 0.5])


def test_variance_examples():
    ps = [0.1, 0.5, 0.7]
    assert exact_variance(JointTable.product(ps)) == pytest.approx(sum(p * (1 - p) for p in ps), abs=1e-14)
    assert exact_variance(correlated_pair()) == pytest.approx(0.84, abs=1e-14)
    assert exact_variance(JointTable(3, [0b101], [1.0])) == 0.0


@given(marginal_lists)
def test_product_law_is_binomial_convolution(ps):
    law = law_of_W(JointTable.product(ps)).dense(len(ps))
    conv = np.array([1.0])
    for p in ps:
        conv = np.convolve(conv, [1 - p, p])
    assert np.max(np.abs(law - conv)) <= 1e-12


@given(st.integers(1, 10), st.floats(0.01, 0.99))
def test_iid_product_matches_binomial(n, p):
    law = law_of_W(JointTable.product([p] * n)).dense(n)
    assert np.max(np.abs(law - binomial_pmf(n, p).dense(n))) <= 1e-12


@given(st.integers(0, 10_000), st.integers(2, 8))
def test_size_bias_laws(seed, n):
    rng = np.random.default_rng(seed)
    jt = random_system(rng, n).joint
    g = exact_size_bias_gap(jt)
    lam = jt.lam()
    second = float(np.dot(np.bitwise_count(jt.masks) ** 2, jt.probs))
    assert g.dist_Ws.mean() == pytest.approx(second / lam, rel=1e-12)
    # the coupling's second marginal is the size-biased law
    hi = max(g.dist_Ws.end, g.coupled_Ws.end)
    assert np.max(np.abs(g.dist_Ws.dense(hi) - g.coupled_Ws.dense(hi))) <= 1e-12
    # Jensen
    assert g.gap_eq13 >= abs(g.dist_Ws.mean() - (lam + 1)) - 1e-12


@given(st.integers(0, 10_000))
def test_independence_defect(seed):
    rng = np.random.default_rng(seed)
    ps = rng.uniform(0.05, 0.95, size=4)
    jt = JointTable.product(ps)
    assert independence_defect(jt, mask_of([0, 1]), mask_of([2, 3])) <= 1e-12
    assert independence_defect(correlated_pair(), 1, 2) == pytest.approx(2 * 2 * 0.21, abs=1e-14)


def test_conditional_size_cap():
    jt = JointTable(21, [0, 1], [0.5, 0.5])
    with pytest.raises(SizeError):
        exact_b_terms(jt, [[a] for a in range(21)])
    with pytest.raises(SizeError):
        exact_size_bias_gap(jt)


def test_tv_to_poisson_error_bar_is_tail_only():
    r = exact_tv_to_poisson(JointTable.product([0.3] * 5))
    assert r.error <= 1e-13
    assert math.isfinite(r.value)
