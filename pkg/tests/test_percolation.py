import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from steinchen.errors import DomainError
from steinchen.mc import replicate_rng
from steinchen.percolation import (
    NEVER,
    Regime,
    TorusState,
    coupled_times,
    estimate_rho,
    fast_midpoint,
    m_t,
    mc_T_distribution,
    neighbour_count,
    origin_uninfected,
    percolation_time,
    regime_classify,
    regime_windows,
    run_frontier,
    run_sweep,
    seed_uniforms,
    step,
)


def test_step_examples():
    full = TorusState.full(2, 5)
    assert step(full).complete and step(full).time == 1
    x = np.ones((5, 5), dtype=bool)
    x[2, 3] = False
    assert step(TorusState(2, 5, x)).complete
    empty = TorusState.empty(2, 4)
    assert step(empty).count == 0


@given(st.integers(1, 3), st.integers(2, 7), st.floats(0.0, 1.0), st.integers(0, 1000))
def test_step_monotone_and_idempotent_at_fixed_points(d, n, p, seed):
    s = TorusState.random(d, n, p, np.random.default_rng(seed))
    for _ in range(n * d + 2):
        nxt = step(s)
        assert np.all(nxt.infected >= s.infected)
        assert nxt.time == s.time + 1
        if np.array_equal(nxt.infected, s.infected):
            assert np.array_equal(step(nxt).infected, nxt.infected)
            break
        s = nxt


def test_percolation_time_examples():
    assert percolation_time(2, 6, 1.0, seed=0).T == 0
    assert percolation_time(2, 6, 0.0, seed=0).T == NEVER
    for n in range(2, 12):
        x = np.zeros(n, dtype=bool)
        x[n // 3] = True
        assert run_sweep(x, 1).T == math.ceil((n - 1) / 2)
    with pytest.raises(DomainError):
        percolation_time(2, 6, 1.5, seed=0)


@given(st.integers(1, 3), st.integers(2, 9), st.floats(0.0, 1.0), st.integers(0, 10_000))
def test_engines_agree(d, n, p, seed):
    x = seed_uniforms(d, n, replicate_rng(seed, 0)) < p
    a = run_sweep(x, d)
    b = run_frontier(x, d)
    assert a.T == b.T and a.sizes == b.sizes
    assert np.array_equal(a.infection_time, b.infection_time)
    assert list(a.sizes) == sorted(a.sizes)


@given(st.integers(1, 3), st.integers(2, 8), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
       st.integers(0, 10_000))
def test_monotone_in_seeding(d, n, p1, p2, seed):
    lo, hi = sorted((p1, p2))
    t_lo, t_hi = coupled_times(d, n, lo, hi, seed)
    assert t_hi <= t_lo


def test_m_t_examples():
    for d in range(1, 6):
        assert m_t(d, 0) == 1
    assert m_t(2, 1) == 4
    for t in range(6):
        assert m_t(1, t) == 1 + 2 * t


@given(st.integers(1, 8), st.integers(0, 10))
def test_m_t_monotone(d, t):
    assert m_t(d, t + 1) > m_t(d, t)
    assert m_t(d + 1, t) >= m_t(d, t)


def test_regime_examples():
    q = fast_midpoint(2, 256, 2)
    assert str(regime_classify(2, 256, 2, q)) == "FAST(2)"
    assert regime_classify(2, 256, 1, 0.999).regime is Regime.OUTSIDE
    # with omega = 1 the one-point window's upper end meets the two-point window's upper end
    fast, two = regime_windows(2, 256, 2, omega=1.0)
    assert fast[1] == two[0] == two[1]
    assert regime_classify(2, 256, 2, fast[1], omega=1.0).regime is Regime.FAST
    assert regime_windows(2, 256, 0)[0][0] == 0.0
    with pytest.raises(DomainError):
        regime_classify(2, 256, 1, 1.0)


def test_neighbour_count_wraps():
    x = np.zeros(5, dtype=bool)
    x[0] = True
    assert neighbour_count(x).tolist() == [0, 1, 0, 0, 1]


def test_rho_examples():
    assert estimate_rho(2, 2, 1.0, 50, seed=0).rho_hat == 0.0
    q = 0.6
    r0 = estimate_rho(2, 0, 1 - q, 4000, seed=1)
    assert r0.estimate.within(q)
    r1 = estimate_rho(1, 1, 1 - q, 4000, seed=2)
    assert r1.estimate.within(q ** 3)


def test_rho_box_matches_torus():
    d, t, n, p = 2, 2, 9, 0.2
    side = 2 * t + 1
    for rep in range(40):
        u = np.random.default_rng(rep).random((n, n))
        traj = run_sweep(u < p, d)
        centre = (n // 2, n // 2)
        torus_uninfected = traj.infection_time[centre] > t
        lo = n // 2 - t
        box = u[lo:lo + side, lo:lo + side][None]
        assert origin_uninfected(box, p, d, t)[0] == torus_uninfected


def test_rho_monotone_under_shared_uniforms():
    u = np.random.default_rng(3).random((500, 7, 7))
    a = origin_uninfected(u, 0.1, 2, 3)
    b = origin_uninfected(u, 0.2, 2, 3)
    assert np.all(b <= a)


def test_t_distribution_examples():
    dist = mc_T_distribution(2, 8, 1.0, 20, seed=0)
    assert dist.prob(0) == 1.0
    q = fast_midpoint(2, 128, 1)
    dist = mc_T_distribution(2, 128, 1 - q, 100, seed=4)
    assert dist.prob(1) > 0.9


def test_t_distribution_thread_independent():
    a = mc_T_distribution(2, 16, 0.2, 60, seed=5, threads=1)
    b = mc_T_distribution(2, 16, 0.2, 60, seed=5, threads=3)
    assert a.counts == b.counts
    assert sum(p for _, p, _ in a.rows()) == pytest.approx(1.0)
