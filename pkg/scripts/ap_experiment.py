"""Monte Carlo probability of no long arithmetic progression against exp(-lambda) and the Gumbel form."""

import argparse

from steinchen.sequences import APModel, ap_gumbel_approx, ap_mc_estimate, ap_threshold


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--x", type=float, nargs="+", default=[-1.0, 0.0, 1.0, 2.0])
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--boundary", action="store_true")
    args = ap.parse_args()

    print("x,t,delta,lambda,phat,stderr,exp_minus_lambda,gumbel")
    for x in args.x:
        th = ap_threshold(args.n, args.p, x)
        if th.t < 1:
            continue
        m = APModel(args.n, th.t, args.p, boundary=args.boundary)
        est = ap_mc_estimate(m, args.reps, args.seed, args.threads)
        g = ap_gumbel_approx(x, args.p, th.delta)
        print(f"{x!r},{th.t},{th.delta!r},{m.lam!r},{est.phat!r},{est.stderr!r},{est.target!r},{g!r}")


if __name__ == "__main__":
    main()
