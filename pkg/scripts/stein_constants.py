"""Tabulate how close the Stein solutions come to their sup-norm bounds."""

import argparse

import numpy as np

from steinchen.dist import CompoundSpec
from steinchen.stein import verify_cp_solution_bounds, verify_poisson_solution_bounds


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambdas", default="0.05,0.5,1,2,5,10,30,100")
    ap.add_argument("--K", type=int, default=12)
    ap.add_argument("--cp-specs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("lambda,window_start,f_ratio,df_ratio,residual")
    for lam in (float(x) for x in args.lambdas.split(",")):
        for s in sorted({0, max(0, int(lam) - args.K // 2)}):
            r = verify_poisson_solution_bounds(lam, args.K, window_start=s)
            print(f"{lam!r},{s},{r.worst_f_ratio!r},{r.worst_df_ratio!r},{r.worst_residual!r}")

    print()
    print("spec,theta,f_ratio,df_ratio,exp_nu_f_ratio,residual")
    rng = np.random.default_rng(args.seed)
    done = 0
    while done < args.cp_specs:
        M = int(rng.integers(1, 5))
        spec = CompoundSpec(tuple(rng.uniform(0.05, 1.5, size=M) * 0.4 ** np.arange(M)))
        if spec.theta >= 0.5:
            continue
        r = verify_cp_solution_bounds(spec, window=args.K, n_samples=200, seed=args.seed)
        print(f"{spec},{spec.theta!r},{r.worst_f_ratio!r},{r.worst_df_ratio!r},"
              f"{r.extra['exp_nu_f_ratio']!r},{r.worst_residual!r}")
        done += 1


if __name__ == "__main__":
    main()
