"""Empirical law of the percolation time at the centre of each one-point window."""

import argparse
import math

from steinchen.percolation import NEVER, estimate_rho, fast_midpoint, mc_T_distribution


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--n", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--t", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()

    print("d,n,t,q,P[T=t],P[T<=t+1],P[NEVER],n^d*rho,-log P[T<=t]")
    for n in args.n:
        for t in args.t:
            q = fast_midpoint(args.d, n, t)
            dist = mc_T_distribution(args.d, n, 1 - q, args.reps, args.seed, args.threads)
            rho = estimate_rho(args.d, t, 1 - q, 20 * args.reps, args.seed, args.threads)
            le = dist.cdf(t)
            print(f"{args.d},{n},{t},{q!r},{dist.prob(t)!r},{dist.cdf(t + 1)!r},{dist.prob(NEVER)!r},"
                  f"{n ** args.d * rho.rho_hat!r},{(-math.log(le) if le > 0 else math.inf)!r}")


if __name__ == "__main__":
    main()
