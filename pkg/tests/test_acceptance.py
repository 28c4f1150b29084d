"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from steinchen.bounds import barbour_hall_lower, classical_bounds, thm1_bounds, thm3_size_bias_bound
from steinchen.cli import main
from steinchen.dist import (
    CompoundSpec,
    binomial_pmf,
    cp_pmf_convolution,
    cp_pmf_panjer,
    poisson_pmf,
    tv_distance,
)
from steinchen.mc import replicate_rng
from steinchen.oracle import exact_size_bias_gap, exact_tv_to_poisson, law_of_W
from steinchen.percolation import (
    coupled_times,
    estimate_rho,
    fast_midpoint,
    mc_T_distribution,
    run_frontier,
    run_sweep,
    seed_uniforms,
)
from steinchen.sequences import (
    APModel,
    HeadRunModel,
    ap_index_count,
    ap_index_count_brute,
    ap_mc_estimate,
    ap_overlap_profile,
    ap_threshold,
    headrun_bound,
    headrun_enumerate,
    headrun_error,
    headrun_run_prob,
)
from steinchen.stein import verify_cp_solution_bounds, verify_poisson_solution_bounds
from steinchen.systems import KINDS, random_system

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SLACK = 1e-10


@pytest.fixture
def report(capsys):
    def _report(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return _report


def test_criterion_1_bound_dominance(report):
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    worst = {}
    count = 0
    for i in range(500):
        n = int(rng.integers(1, 13))
        sys = random_system(rng, n, KINDS[i % len(KINDS)])
        jt = sys.joint
        tv = exact_tv_to_poisson(jt).value
        lam = sys.lam
        t1 = thm1_bounds(sys)
        void = abs(float(law_of_W(jt).probs[0]) - math.exp(-lam))
        t3 = thm3_size_bias_bound(lam, exact_size_bias_gap(jt).gap_eq13)
        slack = {"local_tv": t1.tv_bound - tv, "local_void": t1.void_bound - void, "size_bias": t3 - tv}
        if KINDS[i % len(KINDS)] == "independent":
            c = classical_bounds(sys.marginals)
            slack["stein_independent"] = c.stein_independent - tv
            slack["combined"] = c.combined - tv
            slack["lower"] = tv - barbour_hall_lower(sys.marginals)
        for k, v in slack.items():
            worst[k] = min(worst.get(k, math.inf), v)
        count += 1
    elapsed = time.perf_counter() - start
    ok = count >= 500 and min(worst.values()) >= -SLACK and elapsed < 120
    detail = f"systems={count} worst_slack={min(worst.values()):.3g} " + " ".join(
        f"{k}={v:.3g}" for k, v in sorted(worst.items())) + f" time={elapsed:.1f}s"
    report(1, ok, detail)


def random_small_theta_spec(rng) -> CompoundSpec:
    while True:
        M = int(rng.integers(1, 5))
        rates = rng.uniform(0.0, 2.0, size=M) * rng.uniform(0.05, 1.0) ** np.arange(M)
        rates[0] = max(rates[0], 0.05)
        spec = CompoundSpec(tuple(rates.tolist()))
        if spec.theta < 0.5:
            return spec


def test_criterion_2_stein_solution_bounds(report):
    start = time.perf_counter()
    worst_f = worst_df = worst_res = 0.0
    bad = []
    for lam in (0.05, 0.5, 1.0, 2.0, 10.0, 100.0):
        for s in sorted({0, max(0, int(lam) - 6)}):
            rep = verify_poisson_solution_bounds(lam, 12, window_start=s)
            worst_f = max(worst_f, rep.worst_f_ratio)
            worst_df = max(worst_df, rep.worst_df_ratio)
            worst_res = max(worst_res, rep.worst_residual)
            bad += rep.violations
    rng = np.random.default_rng(7)
    worst7_f = worst7_df = 0.0
    for _ in range(50):
        rep = verify_cp_solution_bounds(random_small_theta_spec(rng), window=12, n_samples=200)
        worst7_f = max(worst7_f, rep.worst_f_ratio)
        worst7_df = max(worst7_df, rep.worst_df_ratio)
        bad += rep.violations
    elapsed = time.perf_counter() - start
    ok = (max(worst_f, worst_df, worst7_f, worst7_df) <= 1 + 1e-9 and not bad and elapsed < 300)
    report(2, ok, f"poisson f={worst_f:.6f} df={worst_df:.16f} residual={worst_res:.2g}; "
                  f"compound f={worst7_f:.6f} df={worst7_df:.6f}; violations={len(bad)} time={elapsed:.1f}s")


def test_criterion_3_compound_cross_algorithm(report):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        M = int(rng.integers(1, 7))
        rates = rng.dirichlet(np.ones(M)) * rng.uniform(0.01, 5.0)
        spec = CompoundSpec(tuple(rates.tolist()))
        a = cp_pmf_panjer(spec, 60).dense(60)
        b = cp_pmf_convolution(spec, 60).dense(60)
        worst = max(worst, float(np.max(np.abs(a - b))))
    report(3, worst <= 1e-12, f"specs=100 K=60 max_abs_diff={worst:.3g}")


def test_criterion_4_head_run(report):
    worst_slack = math.inf
    worst_dp = 0.0
    for p in (0.2, 0.5, 0.8):
        for n in range(1, 21):
            for t in range(1, n + 1):
                m = HeadRunModel(n, t, p)
                worst_slack = min(worst_slack, headrun_bound(m).bound - headrun_error(m))
                worst_dp = max(worst_dp, abs(headrun_run_prob(m) - headrun_enumerate(m)))
    ok = worst_slack >= 0 and worst_dp <= 1e-12
    report(4, ok, f"min(bound - error)={worst_slack:.3g} max|dp - enumeration|={worst_dp:.3g}")


def test_criterion_5_large_lambda(report):
    n, p = 100_000, 1e-3
    lam = n * p
    tv = tv_distance(binomial_pmf(n, p), poisson_pmf(lam, 1e-16)).value
    leading = n * p * p / lam / math.sqrt(2 * math.pi * math.e)
    ratio = tv / leading
    report(5, 0.85 <= ratio <= 1.15, f"tv={tv:.12g} leading={leading:.12g} ratio={ratio:.6f}")


def test_criterion_6_arithmetic_progressions(report):
    start = time.perf_counter()
    n, p = 4096, 0.5
    th = ap_threshold(n, p, 0.0)
    m = APModel(n, th.t, p)
    est = ap_mc_estimate(m, 2000, seed=2024, threads=4)
    target = math.exp(-m.lam)
    mc_ok = 0.1 < m.lam < 3 and abs(est.phat - target) <= 4 * est.stderr
    count_ok = all(ap_index_count(a, t) == ap_index_count_brute(a, t)
                   for a in range(2, 201) for t in range(1, 21))
    prof = ap_overlap_profile(200, 5)
    elapsed = time.perf_counter() - start
    ok = mc_ok and count_ok and prof.ok and elapsed < 600
    report(6, ok, f"t={th.t} delta={th.delta:.4f} lambda={m.lam:.5f} phat={est.phat:.4f} "
                  f"se={est.stderr:.4f} target={target:.4f} counts_ok={count_ok} "
                  f"overlap_ok={prof.ok} time={elapsed:.1f}s")


def test_criterion_7_bootstrap_percolation(report):
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    mono = 0
    for rep in range(200):
        d = int(rng.integers(1, 4))
        size = int(rng.integers(2, {1: 40, 2: 16, 3: 7}[d]))
        lo, hi = sorted(rng.uniform(0, 0.4, size=2))
        t_lo, t_hi = coupled_times(d, size, lo, hi, seed=5, rep=rep)
        mono += t_hi <= t_lo
    q = 0.7
    rho = estimate_rho(1, 1, 1 - q, 20_000, seed=8, threads=4)
    rho_ok = abs(rho.rho_hat - q ** 3) <= 4 * rho.stderr
    qmid = fast_midpoint(2, 128, 1)
    dist = mc_T_distribution(2, 128, 1 - qmid, 400, seed=9, threads=4)
    fast_ok = dist.prob(1) > 0.9
    same = 0
    for rep in range(50):
        d = int(rng.integers(1, 4))
        size = int(rng.integers(2, {1: 60, 2: 24, 3: 9}[d]))
        x = seed_uniforms(d, size, replicate_rng(6, rep)) < rng.uniform(0, 0.5)
        a, b = run_sweep(x, d), run_frontier(x, d)
        same += a.T == b.T and a.sizes == b.sizes and np.array_equal(a.infection_time, b.infection_time)
    elapsed = time.perf_counter() - start
    ok = mono == 200 and rho_ok and fast_ok and same == 50 and elapsed < 600
    report(7, ok, f"(a) monotone {mono}/200 (b) rho={rho.rho_hat:.4f}+-{rho.stderr:.4f} vs q^3={q ** 3:.4f} "
                  f"(c) P[T=1]={dist.prob(1):.4f} (d) engines agree {same}/50 time={elapsed:.1f}s")


CLI_RUNS = [
    ["bounds", "--system", str(CONFIGS / "independent_10.json"), "--independent"],
    ["bounds", "--system", str(CONFIGS / "headrun_n8_t3.json")],
    ["oracle", "--system", str(CONFIGS / "headrun_n8_t3.json")],
    ["stein-check", "--lambda", "3", "--K", "10", "--samples", "200"],
    ["stein-check", "--cp", "0.8,0.1", "--K", "10", "--samples", "200"],
    ["headrun", "--n", "50", "--t", "5", "--p", "0.5", "--reps", "500"],
    ["ap", "--n", "512", "--x", "0", "--p", "0.5", "--reps", "200"],
    ["bootstrap", "--mode", "time-dist", "--d", "2", "--n", "24", "--p", "0.1", "--reps", "60"],
    ["bootstrap", "--mode", "rho", "--d", "2", "--t", "3", "--p", "0.05", "--reps", "2000"],
    ["bootstrap", "--mode", "classify", "--d", "2", "--n", "256", "--t", "2", "--q", "0.9"],
]


def test_criterion_8_determinism(report, tmp_path):
    mismatched = []
    for i, args in enumerate(CLI_RUNS):
        blobs = []
        for threads in ("1", "2", "5"):
            out = tmp_path / f"{i}_{threads}"
            code = main([*args, "--seed", "123", "--threads", threads, "--out", str(out)])
            blobs.append((code, (out / "results.csv").read_bytes()))
        if any(b != blobs[0] for b in blobs) or blobs[0][0] != 0:
            mismatched.append(args[0])
    report(8, not mismatched, f"runs={len(CLI_RUNS)} thread_counts=1,2,5 mismatched={mismatched}")
