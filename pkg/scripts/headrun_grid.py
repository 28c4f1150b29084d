"""Exact head-run error against its bound, and the classical limit law."""

import argparse

from steinchen.sequences import HeadRunModel, headrun_asymptotic_check, headrun_bound, headrun_error


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[20, 100, 1000, 10_000])
    ap.add_argument("--p", type=float, nargs="+", default=[0.2, 0.5, 0.8])
    args = ap.parse_args()

    print("n,t,p,lambda,error,bound")
    for n in args.n:
        for p in args.p:
            for t in range(1, min(n, 40) + 1):
                m = HeadRunModel(n, t, p)
                if m.lam < 1e-3:
                    break
                b = headrun_bound(m)
                print(f"{n},{t},{p},{b.lam!r},{headrun_error(m)!r},{b.bound!r}")

    print()
    print("n,p,c,t,lhs,rhs,bound")
    for n in args.n:
        for p in args.p:
            for c in range(-2, 4):
                a = headrun_asymptotic_check(n, p, c)
                print(f"{n},{p},{c},{a.t},{a.lhs!r},{a.rhs!r},{a.bound!r}")


if __name__ == "__main__":
    main()
