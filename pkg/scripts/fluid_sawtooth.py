"""Fluid limits for several service laws, written as one CSV for plotting.

Deterministic service started from a deterministic residual law gives the
sawtooth 1 + t - floor(t); the other rows start in equilibrium (flat at 1) or
empty (rising towards 1); a backlog at critical load stays put.
"""
import argparse

from qlab import distributions as D
from qlab.fluid import FluidProblem, fluid_limit
from qlab.output import RunManifest, write_csv
from qlab.quadrature import TimeGrid

CASES = {
    "sawtooth": (1.0, D.deterministic(), D.deterministic()),
    "det-equilibrium": (1.0, D.deterministic(), None),
    "erlang2-empty": (0.0, D.erlang(2), None),
    "hyperexp-backlog": (2.0, D.hyperexponential(), None),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, default=5.0)
    ap.add_argument("--h", type=float, default=0.01)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()
    g = TimeGrid(args.T, args.h)
    cols = {name: fluid_limit(FluidProblem(q0, F, init), g).Q.values for name, (q0, F, init) in CASES.items()}
    manifest = RunManifest("scripts/fluid_sawtooth", {"T": args.T, "h": args.h, "cases": list(CASES)}, None)
    write_csv(args.out, ["t", *cols], zip(g.t, *cols.values()), manifest)


if __name__ == "__main__":
    main()
