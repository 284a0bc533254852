"""Command-line entry point: ``qlab <subcommand> [flags]``.

Exit codes: 0 success, 1 usage or validation error, 2 failed acceptance check.
Settings come from ``--config`` (JSON) overridden by explicit flags; the seed
falls back to ``QLAB_SEED`` and then to a fresh random draw, and is always
recorded in the output manifest.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path as FilePath

import numpy as np

from . import acceptance
from .diffusion import (
    assemble_driver, normal_q0, point_mass_q0, solve_limit_convolution, solve_limit_renewal,
    virtual_wait_limit,
)
from .distributions import Distribution, from_config
from .fluid import FluidProblem, fluid_limit
from .output import RunManifest, read_csv, write_csv
from .quadrature import Path, TimeGrid
from .regulator import ConvergenceError, RegulatorProblem, solve_forward, solve_picard
from .renewal import key_identity_residual, renewal_function
from .rng import fresh_seed, stream
from .simulator import (
    EVENT_NAMES, RenewalArrivals, SimConfig, arrivals_from_config, convergence_experiment, simulate,
)
from .diffusion import HWScaling


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _grid_flags(p, T=5.0, h=0.01):
    p.add_argument("--T", type=float, default=None, help=f"horizon (default {T})")
    p.add_argument("--h", type=float, default=None, help=f"grid step (default {h})")


def _common(p):
    p.add_argument("--config", help="JSON file of settings; flags override it")
    p.add_argument("--out", default="-", help="output CSV (default stdout)")


def build_parser() -> Parser:
    parser = Parser(prog="qlab", description="Many-server queue limits in the Halfin-Whitt regime")
    sub = parser.add_subparsers(dest="command", parser_class=Parser)

    p = sub.add_parser("fluid", help="fluid limit and its four terms")
    _common(p)
    p.add_argument("--q0", type=float, default=None)
    p.add_argument("--dist", default=None, help="service law (exp, det1, erlang2, hyperexp or JSON)")
    p.add_argument("--init-dist", default=None, help="residual law of initial customers (default F_e)")
    _grid_flags(p)

    p = sub.add_parser("diffusion", help="Monte-Carlo samples of the diffusion limit")
    _common(p)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--sigma2", type=float, default=None)
    p.add_argument("--dist", default=None)
    p.add_argument("--q0-sd", type=float, default=None, help="Q0 ~ Normal(0, sd^2); default Q0 = 0")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--paths", default=None, help="CSV file for the full paths of replication 0")
    p.add_argument("--jobs", type=int, default=1)
    _grid_flags(p)

    p = sub.add_parser("simulate", help="one discrete-event run, full event log")
    _common(p)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--beta", type=float, default=None, help="arrival rate N - beta sqrt(N)")
    p.add_argument("--rate", type=float, default=None, help="explicit total arrival rate")
    p.add_argument("--dist", default=None)
    p.add_argument("--interarrival", default=None)
    p.add_argument("--q0", type=int, default=None)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("converge", help="finite-N convergence experiment")
    _common(p)
    p.add_argument("--N", type=int, nargs="+", default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--dist", default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    _grid_flags(p, T=10.0)

    p = sub.add_parser("renewal", help="renewal function and key-identity residual")
    _common(p)
    p.add_argument("--dist", default=None)
    _grid_flags(p, T=10.0, h=1e-3)

    p = sub.add_parser("regulator", help="solve z = x + int (z + a)^+ dB for a CSV path x")
    _common(p)
    p.add_argument("--x", default=None, help="CSV with columns t,x on a uniform grid")
    p.add_argument("--dist", default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--method", choices=("forward", "picard"), default=None)

    p = sub.add_parser("verify", help="run acceptance checks")
    p.add_argument("--suite", default="all")
    p.add_argument("--fast", action="store_true", help="10x smaller Monte-Carlo, 2x wider bounds")
    return parser


def resolve(args, defaults: dict, required: tuple[str, ...] = ()) -> dict:
    """Defaults < config file < explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        cfg.update(json.loads(FilePath(args.config).read_text()))
    for key, value in vars(args).items():
        if key in ("config", "out", "command") or value is None:
            continue
        cfg[key] = value
    missing = [k for k in required if cfg.get(k) is None]
    if missing:
        raise UsageError(f"missing required setting(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
    return cfg


def resolve_seed(cfg: dict) -> int:
    if cfg.get("seed") is None:
        env = os.environ.get("QLAB_SEED")
        cfg["seed"] = int(env) if env else fresh_seed()
    return int(cfg["seed"])


def _dist(text) -> Distribution:
    return from_config(text)


def _grid(cfg) -> TimeGrid:
    return TimeGrid(float(cfg["T"]), float(cfg["h"]))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_fluid(args) -> int:
    cfg = resolve(args, {"q0": 1.0, "init_dist": None, "T": 5.0, "h": 0.01}, ("dist",))
    F = _dist(cfg["dist"])
    init = _dist(cfg["init_dist"]) if cfg["init_dist"] else None
    g = _grid(cfg)
    sol = fluid_limit(FluidProblem(float(cfg["q0"]), F, init), g)
    rows = zip(g.t, sol.Q.values, *(p.values for p in sol.terms()))
    manifest = RunManifest("fluid", cfg, None, outputs=[args.out])
    write_csv(args.out, ["t", "Q", "term1", "term2", "term3", "term4"], rows, manifest)
    return 0


def cmd_renewal(args) -> int:
    cfg = resolve(args, {"T": 10.0, "h": 1e-3}, ("dist",))
    F, g = _dist(cfg["dist"]), _grid(cfg)
    M = renewal_function(F, g)
    res = key_identity_residual(F, g)
    manifest = RunManifest("renewal", cfg, None, outputs=[args.out], results={"key_identity_residual": res})
    write_csv(args.out, ["t", "M"], zip(g.t, M.values), manifest)
    print(f"key-identity residual {res:.6g}", file=sys.stderr)
    return 0


def cmd_regulator(args) -> int:
    cfg = resolve(args, {"a": 0.0, "tol": 1e-9, "method": "forward"}, ("x", "dist"))
    _, header, rows = read_csv(cfg["x"])
    data = np.asarray(rows, dtype=float)
    t, x = data[:, 0], data[:, 1]
    if t.size < 2 or not np.allclose(np.diff(t), t[1] - t[0]):
        raise UsageError("x must be sampled on a uniform grid starting at 0")
    g = TimeGrid(float(t[-1]), float(t[1] - t[0]))
    p = RegulatorProblem(Path(g, x), _dist(cfg["dist"]), float(cfg["a"]))
    rep = solve_forward(p) if cfg["method"] == "forward" else solve_picard(p, tol=float(cfg["tol"]))
    manifest = RunManifest("regulator", cfg, None, outputs=[args.out],
                           results={"iterations": rep.iterations, "residual": rep.residual})
    write_csv(args.out, ["t", "z"], zip(g.t, rep.solution.values), manifest)
    print(f"iterations {rep.iterations} residual {rep.residual:.3e}", file=sys.stderr)
    return 0


def cmd_diffusion(args) -> int:
    cfg = resolve(args, {"beta": 1.0, "sigma2": 1.0, "q0_sd": None, "reps": 100, "T": 5.0, "h": 0.01,
                         "paths": None}, ("dist",))
    seed = resolve_seed(cfg)
    F, g = _dist(cfg["dist"]), _grid(cfg)
    beta = float(cfg["beta"])
    q0 = normal_q0(0.0, float(cfg["q0_sd"])) if cfg.get("q0_sd") else point_mass_q0(0.0)
    d = assemble_driver(F, g, stream(seed, 0), int(cfg["reps"]), sigma2=float(cfg["sigma2"]), q0=q0)
    QF = solve_limit_convolution(d, beta)
    QM = solve_limit_renewal(d, beta, renewal_function(F, g))
    V = virtual_wait_limit(d, QF, beta)
    gap = np.max(np.abs(QF - QM), axis=1)
    outputs = [args.out] + ([cfg["paths"]] if cfg["paths"] else [])
    manifest = RunManifest("diffusion", cfg, seed, outputs=outputs)
    rows = zip(range(d.size), QF[:, -1], V[:, -1], gap)
    write_csv(args.out, ["rep", "Q_F_T", "V_T", "sup_gap"], rows, manifest)
    if cfg["paths"]:
        cols = ["t", "zeta", "Q_F", "Q_M", "V", "bridge", "M1", "M2"]
        rows = zip(g.t, d.zeta[0], QF[0], QM[0], V[0], d.bridge[0], d.M1[0], d.M2[0])
        write_csv(cfg["paths"], cols, rows, manifest)
    return 0


def _sim_config(cfg) -> SimConfig:
    N = int(cfg["N"])
    if cfg.get("arrivals"):
        arrivals = arrivals_from_config(cfg["arrivals"])
    else:
        rate = cfg.get("rate")
        if rate is None:
            rate = HWScaling(float(cfg["beta"]), N).arrival_rate
        arrivals = RenewalArrivals(float(rate), _dist(cfg.get("interarrival") or "exp"))
    init = _dist(cfg["init"]) if cfg.get("init") else None
    return SimConfig(N, arrivals, _dist(cfg["dist"]), float(cfg["T"]), q0=cfg.get("q0"), init=init,
                     seed=int(cfg["seed"]), replication=int(cfg.get("replication", 0)))


def cmd_simulate(args) -> int:
    cfg = resolve(args, {"beta": 1.0, "T": 10.0, "dist": "exp"}, ("N",))
    if args.rate is not None or args.beta is not None or args.interarrival is not None:
        cfg.pop("arrivals", None)  # explicit arrival flags beat a materialized stream
    resolve_seed(cfg)
    sim = _sim_config(cfg)
    log = simulate(sim)
    t, rank, cust, Q, A, Ah, D = log.events()
    # the recorded config is complete and in flag vocabulary, so it replays via --config
    full = sim.to_config()
    resolved = {"N": sim.N, "T": sim.horizon, "dist": full["service"], "q0": full["q0"],
                "init": full["init"], "arrivals": full["arrivals"], "seed": sim.seed,
                "replication": sim.replication}
    manifest = RunManifest("simulate", resolved, sim.seed, outputs=[args.out])
    rows = ((ti, EVENT_NAMES[int(r)], c, q, a, ah, dd) for ti, r, c, q, a, ah, dd in zip(t, rank, cust, Q, A, Ah, D))
    write_csv(args.out, ["time", "event", "customer", "Q", "A", "A_hat", "D"], rows, manifest)
    return 0


def cmd_converge(args) -> int:
    cfg = resolve(args, {"N": [25, 100, 400], "beta": 1.0, "dist": "exp", "reps": 50, "T": 10.0, "h": 0.01}, ())
    seed = resolve_seed(cfg)
    rep = convergence_experiment(float(cfg["beta"]), [int(n) for n in cfg["N"]], int(cfg["reps"]),
                                 float(cfg["T"]), float(cfg["h"]), _dist(cfg["dist"]), seed=seed,
                                 jobs=int(cfg.get("jobs", 1)))
    manifest = RunManifest("converge", cfg, seed, outputs=[args.out],
                           results={"median_fluid_sup": rep.median_fluid(), "ks": rep.ks})
    cols = ["N", "rep", "fluid_sup", "W0_sup", "M2_sup", "Q_tilde_T", "sqrtN_V_T", "ks_vs_limit"]
    write_csv(args.out, cols, rep.rows(), manifest)
    return 0


def cmd_verify(args) -> int:
    if args.suite not in acceptance.SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(sorted(acceptance.SUITES))}")
    results = acceptance.run_suite(args.suite, fast=args.fast)
    print(f"{'check':<48} {'value':>12} {'bound':>12}  pass")
    for r in results:
        print(f"[{r.criterion:>2}] {r.name:<43} {r.value:>12.4g} {r.bound:>12.4g}  {'yes' if r.passed else 'NO'}")
    return 0 if all(r.passed for r in results) else 2


COMMANDS = {
    "fluid": cmd_fluid, "renewal": cmd_renewal, "regulator": cmd_regulator, "diffusion": cmd_diffusion,
    "simulate": cmd_simulate, "converge": cmd_converge, "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, KeyError, FileNotFoundError, ConvergenceError) as exc:
        print(f"qlab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
