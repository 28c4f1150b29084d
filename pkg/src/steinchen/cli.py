"""Command line front end.

Every run writes ``results.csv`` and ``manifest.json`` into ``--out``.  The
CSV depends only on the parsed configuration and ``--seed`` (never on
``--threads``), and every row names the method that produced it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .bounds import (
    barbour_hall_lower,
    classical_bounds,
    load_system,
    thm1_bounds,
    thm2_bounds,
    thm3_size_bias_bound,
    thm6_bounds,
    thm8_bound,
)
from .dist import CompoundSpec
from .errors import (
    BoundViolation,
    DomainError,
    InvalidStructureError,
    NumericError,
    SizeError,
    SteinChenError,
    UnsupportedInputError,
)
from .oracle import exact_b_terms, exact_size_bias_gap, exact_tv_to_poisson, exact_variance, law_of_W
from .percolation import (
    NEVER,
    estimate_rho,
    m_t,
    mc_T_distribution,
    percolation_time,
    regime_classify,
)
from .sequences import (
    APModel,
    HeadRunModel,
    ap_gumbel_approx,
    ap_mc_estimate,
    ap_threshold,
    headrun_bound,
    headrun_error,
    headrun_mc_estimate,
    headrun_run_prob,
)
from .stein import verify_cp_solution_bounds, verify_poisson_solution_bounds

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(message)


@dataclass
class RunConfig:
    command: str
    params: dict[str, Any]
    seed: int
    out: str
    threads: int
    tol: float


@dataclass
class Table:
    header: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def add(self, *row: Any) -> None:
        # numpy scalars would otherwise print as np.float64(...)
        self.rows.append([v.item() if hasattr(v, "item") else v for v in row])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


class _Failure(Exception):
    """A check that ran but failed; carries the table so it is still written."""

    def __init__(self, table: Table, message: str):
        super().__init__(message)
        self.table = table


# -- subcommands ----------------------------------------------------------------


def cmd_bounds(cfg: RunConfig) -> Table:
    a = cfg.params
    sys_ = load_system(a["system"])
    t = Table(["bound_name", "value", "applicable", "conditions", "method"])
    try:
        for r in thm1_bounds(sys_).rows():
            t.add(*r)
    except UnsupportedInputError as e:
        t.add("local_tv", math.nan, False, str(e), "local_dependence_tv")
    if a.get("independent"):
        for r in classical_bounds(sys_.marginals).rows():
            t.add(*r)
        t.add("lower_independent", barbour_hall_lower(sys_.marginals), True,
              "independent; lower bound", "barbour_hall_lower")
    if sys_.joint is not None and sys_.n <= 20:
        gap = exact_size_bias_gap(sys_.joint).gap_eq13
        t.add("size_bias", thm3_size_bias_bound(sys_.lam, gap), True,
              "index-mixture quantile coupling", "size_bias_coupling")
        var = exact_variance(sys_.joint)
        s2 = float((sys_.marginals ** 2).sum())
        for rel in ("negative", "positive"):
            v = thm2_bounds(sys_.lam, var, s2, rel)
            t.add(f"monotone_{rel}", v, v >= 0 and rel == a.get("relation"),
                  f"{rel}ly related (asserted by caller)", f"monotone_coupling_{rel}")
    if sys_.outer is not None and sys_.joint is not None:
        try:
            for r in thm6_bounds(sys_).rows():
                t.add(*r)
            for r in thm8_bound(sys_).rows():
                t.add(*r)
        except InvalidStructureError as e:
            t.add("cp_exp_nu", math.nan, False, str(e), "compound_local_exp_nu")
    return t


def cmd_oracle(cfg: RunConfig) -> Table:
    sys_ = load_system(cfg.params["system"])
    if sys_.joint is None:
        raise UnsupportedInputError("the oracle needs a joint table")
    jt = sys_.joint
    t = Table(["quantity", "value", "method"])
    law = law_of_W(jt)
    tv = exact_tv_to_poisson(jt, cfg.tol)
    t.add("lambda", jt.lam(), "enumeration")
    t.add("variance", exact_variance(jt), "enumeration")
    t.add("tv_poisson", tv.value, "enumeration")
    t.add("tv_poisson_error", tv.error, "poisson_tail")
    t.add("p_w0_minus_exp", law.probs[0] - math.exp(-jt.lam()), "enumeration")
    if jt.n <= 20:
        b = exact_b_terms(jt, [sorted(x) for x in sys_.neighbourhoods])
        t.add("b1", b.b1, "enumeration")
        t.add("b2", b.b2, "enumeration")
        t.add("b3", b.b3, "enumeration_conditional")
        t.add("size_bias_gap", exact_size_bias_gap(jt).gap_eq13, "quantile_coupling")
    for k, p in enumerate(law.probs.tolist()):
        t.add(f"P(W={k})", p, "enumeration")
    return t


def cmd_stein_check(cfg: RunConfig) -> Table:
    a = cfg.params
    if a.get("cp"):
        spec = CompoundSpec(tuple(float(x) for x in a["cp"].split(",")))
        rep = verify_cp_solution_bounds(spec, window=a["K"], n_samples=a["samples"], seed=cfg.seed)
        method = "compound_solution_bounds"
    else:
        if a.get("lam") is None:
            raise ConfigError("stein-check needs --lambda or --cp")
        rep = verify_poisson_solution_bounds(a["lam"], a["K"], window_start=a["window_start"],
                                             n_samples=a["samples"], seed=cfg.seed)
        method = "poisson_solution_bounds"
    t = Table(["lambda_or_spec", "n_sets_tested", "worst_f_ratio", "worst_df_ratio",
               "worst_residual", "exp_nu_f_ratio", "exp_nu_df_ratio", "theta", "ok", "method"])
    x = rep.extra
    t.add(rep.label, rep.n_sets, rep.worst_f_ratio, rep.worst_df_ratio, rep.worst_residual,
          x.get("exp_nu_f_ratio", math.nan), x.get("exp_nu_df_ratio", math.nan),
          x.get("theta", math.nan), rep.ok, method)
    if not rep.ok:
        raise _Failure(t, "; ".join(rep.violations))
    return t


def cmd_headrun(cfg: RunConfig) -> Table:
    a = cfg.params
    m = HeadRunModel(a["n"], a["t"], a["p"])
    b = headrun_bound(m)
    run = headrun_run_prob(m)
    t = Table(["quantity", "value", "stderr", "method"])
    t.add("lambda", b.lam, 0.0, "declumped_mean")
    t.add("p_longest_lt_t", 1.0 - run, 0.0, "transfer_recursion")
    t.add("p_run", run, 0.0, "transfer_recursion")
    t.add("exp_neg_lambda", math.exp(-b.lam), 0.0, "poisson_limit")
    t.add("abs_error", headrun_error(m), 0.0, "transfer_recursion")
    t.add("bound", b.bound, 0.0, "head_run_bound")
    if a["reps"] > 0:
        est = headrun_mc_estimate(m, a["reps"], cfg.seed, cfg.threads)
        t.add("p_longest_lt_t_mc", est.estimate, est.stderr, "monte_carlo")
    if headrun_error(m) > b.bound:
        raise _Failure(t, "head-run error exceeds its bound")
    return t


def cmd_ap(cfg: RunConfig) -> Table:
    a = cfg.params
    t = Table(["quantity", "value", "stderr", "method"])
    if a.get("t") is None:
        if a.get("x") is None:
            raise ConfigError("ap needs --t or --x")
        th = ap_threshold(a["n"], a["p"], a["x"])
        tt, delta = th.t, th.delta
        t.add("t", tt, 0.0, "threshold_floor")
        t.add("delta", delta, 0.0, "threshold_floor")
        t.add("gumbel", ap_gumbel_approx(a["x"], a["p"], delta), 0.0, "gumbel_limit")
    else:
        tt = a["t"]
        t.add("t", tt, 0.0, "given")
    m = APModel(a["n"], tt, a["p"], a["boundary"])
    t.add("index_count", m.index_count, 0.0, "index_set_size")
    t.add("lambda", m.lam, 0.0, "index_set_size")
    t.add("exp_neg_lambda", math.exp(-m.lam), 0.0, "poisson_limit")
    if a["reps"] > 0:
        est = ap_mc_estimate(m, a["reps"], cfg.seed, cfg.threads)
        t.add("p_no_progression_mc", est.phat, est.stderr, "monte_carlo")
    return t


def cmd_bootstrap(cfg: RunConfig) -> Table:
    a = cfg.params
    d = a["d"]
    if (a.get("p") is None) == (a.get("q") is None):
        raise ConfigError("bootstrap needs exactly one of --p or --q")
    p = a["p"] if a.get("p") is not None else 1.0 - a["q"]
    mode = a["mode"]
    t = Table(["quantity", "value", "stderr", "method"])
    if mode == "classify":
        if a.get("t") is None:
            raise ConfigError("classify needs --t")
        c = regime_classify(d, a["n"], a["t"], 1.0 - p, a.get("omega"))
        t.add("m_t", m_t(d, a["t"]), 0.0, "m_t")
        t.add("fast_lo", c.fast_window[0], 0.0, "one_point_window")
        t.add("fast_hi", c.fast_window[1], 0.0, "one_point_window")
        t.add("two_point_hi", c.two_point_window[1], 0.0, "two_point_window")
        t.add("regime", str(c), 0.0, "regime_windows")
    elif mode == "rho":
        if a.get("t") is None:
            raise ConfigError("rho needs --t")
        r = estimate_rho(d, a["t"], p, a["reps"], cfg.seed, cfg.threads)
        t.add("rho", r.rho_hat, r.stderr, "dependence_box_monte_carlo")
        if a.get("n"):
            t.add("lambda", float(a["n"]) ** d * r.rho_hat, float(a["n"]) ** d * r.stderr,
                  "n_d_times_rho")
    elif mode == "time-dist":
        if not a.get("n"):
            raise ConfigError("time-dist needs --n")
        dist = mc_T_distribution(d, a["n"], p, a["reps"], cfg.seed, cfg.threads, a["engine"])
        for label, prob, se in dist.rows():
            t.add(f"P(T={label})", prob, se, "monte_carlo")
        if a.get("snapshots"):
            traj = percolation_time(d, a["n"], p, cfg.seed, 0, a["engine"])
            snap = Table(["t", "count_infected"])
            for step, count in traj.snapshots():
                snap.add(step, count)
            Path(cfg.out).mkdir(parents=True, exist_ok=True)
            (Path(cfg.out) / "snapshots.csv").write_text(snap.to_csv())
            t.add("T_replicate0", -1.0 if traj.T == NEVER else traj.T, 0.0, "single_run")
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    return t


COMMANDS: dict[str, tuple[str, Callable[[RunConfig], Table]]] = {
    "bounds": ("dep_bounds", cmd_bounds),
    "oracle": ("exact_oracle", cmd_oracle),
    "stein-check": ("stein_lab", cmd_stein_check),
    "headrun": ("seq_apps", cmd_headrun),
    "ap": ("seq_apps", cmd_ap),
    "bootstrap": ("bootstrap_perc", cmd_bootstrap),
}


def _add_common(p: argparse.ArgumentParser, defaults: bool) -> None:
    def d(v):
        return v if defaults else argparse.SUPPRESS

    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--out", default=d("."))
    p.add_argument("--threads", type=int, default=d(1))
    p.add_argument("--tol", type=float, default=d(1e-14), help="Poisson truncation tolerance")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="steinchen", description=__doc__.splitlines()[0], allow_abbrev=False)
    _add_common(ap, defaults=True)
    # the global flags are also accepted after the subcommand
    common = _Parser(add_help=False, allow_abbrev=False)
    _add_common(common, defaults=False)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bounds", allow_abbrev=False, parents=[common], help="closed-form bounds for a system description")
    p.add_argument("--system", required=True)
    p.add_argument("--independent", action="store_true", help="assert the indicators are independent")
    p.add_argument("--relation", choices=["negative", "positive"])

    p = sub.add_parser("oracle", allow_abbrev=False, parents=[common], help="exact quantities by enumeration")
    p.add_argument("--system", required=True)

    p = sub.add_parser("stein-check", allow_abbrev=False, parents=[common], help="verify Stein solution bounds")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--cp", help="comma-separated cluster rates lambda_1,lambda_2,...")
    p.add_argument("--K", type=int, default=12)
    p.add_argument("--window-start", type=int, default=0)
    p.add_argument("--samples", type=int, default=1000)

    p = sub.add_parser("headrun", allow_abbrev=False, parents=[common], help="longest head run")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--reps", type=int, default=0)

    p = sub.add_parser("ap", allow_abbrev=False, parents=[common], help="maximal arithmetic progressions")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=int)
    p.add_argument("--x", type=float)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--reps", type=int, default=0)
    p.add_argument("--boundary", action="store_true", help="also count progressions at a = 0")

    p = sub.add_parser("bootstrap", allow_abbrev=False, parents=[common], help="bootstrap percolation on the torus")
    p.add_argument("--mode", choices=["time-dist", "rho", "classify"], required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--t", type=int)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--omega", type=float)
    p.add_argument("--engine", choices=["auto", "sweep", "frontier"], default="auto")
    p.add_argument("--snapshots", action="store_true")
    return ap


def parse_config(argv: list[str]) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    common = {k: ns.pop(k) for k in ("seed", "out", "threads", "tol")}
    command = ns.pop("command")
    if common["threads"] < 1:
        raise ConfigError("--threads must be at least 1")
    if not 0 < common["tol"] < 1:
        raise ConfigError("--tol must lie in (0, 1)")
    return RunConfig(command, ns, **common)


def _error_line(exit_code: int, kind: str, module: str, message: str) -> str:
    return json.dumps({"error": message, "kind": kind, "module": module, "exit": exit_code},
                      sort_keys=True)


def run(cfg: RunConfig) -> int:
    module, fn = COMMANDS[cfg.command]
    out = Path(cfg.out)
    start = time.perf_counter()
    status, message, table = EXIT_OK, "", None
    try:
        table = fn(cfg)
    except _Failure as e:
        status, message, table = EXIT_VIOLATION, str(e), e.table
        print(_error_line(status, "BoundViolation", module, message), file=sys.stderr)
    except BoundViolation as e:
        status, message = EXIT_VIOLATION, str(e)
        print(_error_line(status, "BoundViolation", module, message), file=sys.stderr)
    except (NumericError, ArithmeticError, FloatingPointError) as e:
        status, message = EXIT_NUMERIC, str(e)
        print(_error_line(status, type(e).__name__, module, message), file=sys.stderr)
    except (ConfigError, DomainError, SizeError, UnsupportedInputError,
            InvalidStructureError, OSError, ValueError, KeyError) as e:
        status, message = EXIT_CONFIG, str(e)
        print(_error_line(status, type(e).__name__, module, message), file=sys.stderr)
    out.mkdir(parents=True, exist_ok=True)
    if table is not None:
        (out / "results.csv").write_text(table.to_csv())
    manifest = {
        "command": cfg.command,
        "module": module,
        "inputs": cfg.params,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "tol": cfg.tol,
        "version": __version__,
        "wall_time_s": time.perf_counter() - start,
        "exit_code": status,
        "error": message or None,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return status


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ConfigError as e:
        print(_error_line(EXIT_CONFIG, "ConfigError", "cli", str(e)), file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg)
    except SteinChenError as e:  # pragma: no cover - every known error is mapped above
        print(_error_line(EXIT_NUMERIC, type(e).__name__, "cli", str(e)), file=sys.stderr)
        return EXIT_NUMERIC
