"""Convolution form vs renewal form of the diffusion limit on sampled drivers.

Prints the worst sup-norm gap per (service law, beta) and the law of Q_F(T),
with the exponential case compared against the one-dimensional HW diffusion.
"""
import argparse

import numpy as np

from qlab import distributions as D
from qlab.diffusion import (
    assemble_driver, hw_reference_diffusion, normal_q0, solve_limit_convolution, solve_limit_renewal,
)
from qlab.quadrature import TimeGrid
from qlab.renewal import renewal_function
from qlab.rng import stream
from qlab.simulator import ks_distance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, default=5.0)
    ap.add_argument("--h", type=float, default=0.01)
    ap.add_argument("--draws", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    g = TimeGrid(args.T, args.h)
    print(f"{'law':<16} {'beta':>5} {'max gap':>10} {'mean Q_F(T)':>12} {'sd Q_F(T)':>10} {'KS vs HW':>9}")
    for j, F in enumerate((D.exponential(), D.erlang(2), D.hyperexponential(), D.deterministic())):
        M = renewal_function(F, g)
        d = assemble_driver(F, g, stream(args.seed, j), args.draws, q0=normal_q0())
        for beta in (0.0, 0.5, 1.0):
            QF = solve_limit_convolution(d, beta)
            gap = np.max(np.abs(QF - solve_limit_renewal(d, beta, M)))
            ks = ""
            if F.kind == "exponential":
                X = hw_reference_diffusion(beta, 1.0, g, stream(args.seed, 100 + j), args.draws, q0=normal_q0())
                ks = f"{ks_distance(QF[:, -1], X[:, -1]):.4f}"
            print(f"{F.kind:<16} {beta:>5.2f} {gap:>10.2e} {QF[:, -1].mean():>12.4f} "
                  f"{QF[:, -1].std():>10.4f} {ks:>9}")


if __name__ == "__main__":
    main()
