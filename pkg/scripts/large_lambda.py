"""Binomial-to-Poisson distance relative to its large-lambda leading term."""

import argparse
import math

from steinchen.dist import binomial_pmf, poisson_pmf, tv_distance


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambdas", default="1,5,20,100,500")
    ap.add_argument("--p", type=float, nargs="+", default=[1e-2, 1e-3])
    args = ap.parse_args()

    print("n,p,lambda,tv,leading,ratio")
    for lam in (float(x) for x in args.lambdas.split(",")):
        for p in args.p:
            n = round(lam / p)
            tv = tv_distance(binomial_pmf(n, p), poisson_pmf(n * p, 1e-16)).value
            lead = p / math.sqrt(2 * math.pi * math.e)
            print(f"{n},{p!r},{n * p!r},{tv!r},{lead!r},{tv / lead!r}")


if __name__ == "__main__":
    main()
