"""Finite-N simulation against the fluid and diffusion limits (M/M/N or M/G/N).

    python scripts/des_convergence.py --N 25 100 400 --reps 50 --jobs 4
"""
import argparse

import numpy as np

from qlab.distributions import from_config
from qlab.output import RunManifest, write_csv
from qlab.simulator import convergence_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, nargs="+", default=[25, 100, 400])
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--dist", default="exp")
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None, help="per-replication CSV")
    args = ap.parse_args()
    rep = convergence_experiment(args.beta, args.N, args.reps, args.T, service=from_config(args.dist),
                                 seed=args.seed, jobs=args.jobs)
    print(f"{'N':>6} {'median fluid':>13} {'median W0':>10} {'median M2':>10} {'KS Q(T)':>8}")
    for N in rep.Ns:
        print(f"{N:>6} {np.median(rep.fluid_sup[N]):>13.4f} {np.median(rep.W0[N]):>10.4f} "
              f"{np.median(rep.M2[N]):>10.4f} {rep.ks[N]:>8.4f}")
    if args.out:
        cols = ["N", "rep", "fluid_sup", "W0_sup", "M2_sup", "Q_tilde_T", "sqrtN_V_T", "ks_vs_limit"]
        write_csv(args.out, cols, rep.rows(), RunManifest("scripts/des_convergence", vars(args), args.seed))


if __name__ == "__main__":
    main()
