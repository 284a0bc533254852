"""Acceptance checks, one function per criterion, grouped into suites.

Each check returns :class:`CheckResult` rows.  ``fast=True`` divides
Monte-Carlo sizes by 10 and doubles statistical bounds; exact and grid
checks are unchanged.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from . import distributions as D
from .diffusion import (
    HWScaling, assemble_driver, b_process_covariance_check, compute_M1, hw_reference_diffusion,
    normal_q0, sample_bridge, sample_M2, sample_xi, solve_limit_convolution, solve_limit_renewal,
    virtual_wait_residual,
)
from .fluid import FluidProblem, equilibrium_check, fluid_limit
from .quadrature import Path, TimeGrid, distance
from .regulator import (
    RegulatorProblem, contraction_window, regulate, solve_forward, solve_picard, solve_pointmass,
    window_mass,
)
from .renewal import key_identity_residual, renewal_function
from .rng import stream
from .simulator import (
    RenewalArrivals, SimConfig, convergence_experiment, ks_distance, simulate, verify_waiting_identity, virtual_wait,
)

SEED = 20240601


@dataclass(frozen=True)
class CheckResult:
    criterion: int
    name: str
    value: float
    bound: float
    passed: bool
    seconds: float = 0.0
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        extra = f"  [{self.detail}]" if self.detail else ""
        return (f"criterion {self.criterion:>2} {flag}  {self.name}: value={self.value:.4g} "
                f"bound={self.bound:.4g} time={self.seconds:.1f}s{extra}")


def _mc(n: int, fast: bool) -> int:
    return max(n // 10, 20) if fast else n


def _timed(criterion: int, budget: float, fn: Callable[[], list[tuple]]) -> list[CheckResult]:
    """Run ``fn`` (returning ``(name, value, bound, ok, detail)`` tuples) under a time budget."""
    t0 = time.perf_counter()
    rows = fn()
    dt = time.perf_counter() - t0
    out = []
    for name, value, bound, ok, detail in rows:
        out.append(CheckResult(criterion, name, float(value), float(bound), bool(ok), dt, detail))
    out.append(CheckResult(criterion, "runtime", dt, budget, dt < budget, dt))
    return out


# ---------------------------------------------------------------------------
# fluid, renewal, regulator
# ---------------------------------------------------------------------------


def check_sawtooth(fast: bool = False) -> list[CheckResult]:
    def run():
        g = TimeGrid(5.0, 0.01)
        Q = fluid_limit(FluidProblem(1.0, D.deterministic(), D.deterministic()), g).Q.values
        t = g.t
        exact = 1.0 + t - np.floor(t + 1e-9)
        away = np.abs(t - np.round(t)) >= g.step - 1e-12
        err = float(np.max(np.abs(Q - exact)[away]))
        return [("sawtooth sup error off integers", err, 2 * g.step, err <= 2 * g.step, "")]
    return _timed(1, 1.0, run)


def check_equilibrium_fluid(fast: bool = False) -> list[CheckResult]:
    def run():
        g = TimeGrid(10.0, 1e-3)
        rows = []
        for F in (D.exponential(), D.erlang(2), D.deterministic()):
            dev = equilibrium_check(F, g)
            rows.append((f"equilibrium fluid {F.kind}", dev, 1e-4, dev <= 1e-4, ""))
        return rows
    return _timed(2, 5.0, run)


def check_renewal_function(fast: bool = False) -> list[CheckResult]:
    def run():
        g = TimeGrid(10.0, 1e-3)
        e = float(np.max(np.abs(renewal_function(D.exponential(), g).values - g.t)))
        d = float(np.max(np.abs(renewal_function(D.deterministic(), g).values - np.floor(g.t + 1e-9))))
        return [("exponential sup|M - t|", e, 1e-2, e <= 1e-2, ""),
                ("deterministic |M - floor t|", d, 0.0, d == 0.0, "exact")]
    return _timed(3, 5.0, run)


def check_key_identity(fast: bool = False) -> list[CheckResult]:
    def run():
        rows = []
        g, g2 = TimeGrid(10.0, 1e-3), TimeGrid(10.0, 5e-4)
        for F in (D.exponential(), D.erlang(2), D.deterministic(), D.hyperexponential()):
            r1 = key_identity_residual(F, g)
            rows.append((f"key identity {F.kind}", r1, 1e-2, r1 <= 1e-2, ""))
            if r1 < 1e-12:
                # the grid is exact for this law; there is no error left to halve
                rows.append((f"halving ratio {F.kind}", float("nan"), 2.2, True, f"exact (residual {r1:.1e})"))
                continue
            ratio = r1 / key_identity_residual(F, g2)
            rows.append((f"halving ratio {F.kind}", ratio, 2.2, 1.8 <= ratio <= 2.2, "band [1.8, 2.2]"))
        return rows
    return _timed(4, 10.0, run)


def random_path(rng: np.random.Generator, grid: TimeGrid) -> Path:
    """Random walk plus a random smooth component plus a few jumps."""
    t = grid.t
    walk = np.concatenate([[0.0], np.cumsum(rng.normal(0, math.sqrt(grid.step), grid.n))])
    smooth = rng.normal() + rng.normal() * np.sin(rng.uniform(0.5, 4) * t) + rng.normal(0, 0.3) * t
    jumps = sum(rng.normal() * (t >= rng.uniform(0, grid.horizon)) for _ in range(3))
    return Path(grid, walk + smooth + jumps)


def random_law(rng: np.random.Generator) -> D.Distribution:
    k = rng.integers(5)
    if k == 0:
        return D.exponential()
    if k == 1:
        return D.erlang(int(rng.integers(2, 5)))
    if k == 2:
        return D.hyperexponential((0.3, 0.7), (rng.uniform(0.2, 1), rng.uniform(1, 4)))
    if k == 3:
        return D.lattice((0.5, 1.0, 2.0), tuple(rng.dirichlet([1, 1, 1])))
    return D.atom_plus_exponential(float(rng.choice([0.5, 1.0])), float(rng.uniform(0.1, 0.7)))


def check_regulator(fast: bool = False) -> list[CheckResult]:
    def run():
        rng = stream(SEED, 6)
        g = TimeGrid(5.0, 0.01)
        tol = 1e-9
        agree, unique = 0.0, 0.0
        for _ in range(50):
            x, F, a = random_path(rng, g), random_law(rng), float(rng.choice([0.0, -1.0]))
            p = RegulatorProblem(x, F, a)
            z = solve_forward(p).solution
            agree = max(agree, distance(solve_picard(p, tol=tol).solution, z))
            unique = max(unique, distance(solve_picard(p, tol=tol).solution,
                                          solve_picard(p, tol=tol, initial=x).solution))
        # point-mass Lipschitz: ||phi(x1) - phi(x2)||_t <= k ||x1 - x2||_t on [(k-1)c, kc)
        pm_worst = 0.0
        for _ in range(50):
            c = float(rng.choice([0.5, 1.0, 1.3]))
            a = float(rng.choice([0.0, -1.0]))
            x1, x2 = random_path(rng, g), random_path(rng, g)
            z1, z2 = solve_pointmass(x1, c, a), solve_pointmass(x2, c, a)
            dz = np.maximum.accumulate(np.abs(z1.values - z2.values))
            dx = np.maximum.accumulate(np.abs(x1.values - x2.values))
            k = np.floor(g.t / (round(c / g.step) * g.step) + 1e-9) + 1
            pm_worst = max(pm_worst, float(np.max(dz - k * dx)))
        # nondegenerate: ||phi(x1) - phi(x2)||_{k delta} <= (1 - eps)^-k ||x1 - x2||_{k delta}
        nd_worst = -np.inf
        for _ in range(50):
            F = random_law(rng)
            if F.kind == "lattice":
                F = D.exponential()
            delta = contraction_window(F, g, eps=float(rng.uniform(0.2, 0.6)))
            eps = window_mass(F, g, delta) + 1e-12
            if eps >= 1:
                continue
            a = float(rng.choice([0.0, -1.0]))
            x1, x2 = random_path(rng, g), random_path(rng, g)
            dz = np.abs(regulate(x1, F, a).values - regulate(x2, F, a).values)
            dx = np.abs(x1.values - x2.values)
            w = int(round(delta / g.step))
            for k in range(1, g.n // w + 2):
                m = min(k * w, g.n) + 1
                nd_worst = max(nd_worst, float(dz[:m].max() - (1 - eps) ** (-k) * dx[:m].max()))
        bound = max(tol, 10 * g.step)
        return [
            ("picard vs forward", agree, bound, agree <= bound, "50 problems"),
            ("two-start uniqueness", unique, 2 * tol, unique <= 2 * tol, "50 problems"),
            ("point-mass Lipschitz slack", pm_worst, 0.0, pm_worst <= 1e-12, "max(lhs - rhs), 50 pairs"),
            ("nondegenerate Lipschitz slack", nd_worst, 0.0, nd_worst <= 1e-12, "max(lhs - rhs), 50 pairs"),
        ]
    return _timed(6, 30.0, run)


# ---------------------------------------------------------------------------
# diffusion
# ---------------------------------------------------------------------------


def check_representations(fast: bool = False) -> list[CheckResult]:
    def run():
        g = TimeGrid(5.0, 0.01)
        n = _mc(100, fast)
        worst = 0.0
        for i, F in enumerate((D.exponential(), D.erlang(2))):
            M = renewal_function(F, g)
            for beta in (0.0, 1.0):
                d = assemble_driver(F, g, stream(SEED, 5, i, int(beta)), n, sigma2=1.0, q0=normal_q0())
                gap = np.abs(solve_limit_convolution(d, beta) - solve_limit_renewal(d, beta, M))
                worst = max(worst, float(gap.max()))
        return [("max sup|Q_F - Q_M|", worst, 5e-3, worst <= 5e-3, f"{4 * n} drivers")]
    return _timed(5, 60.0, run)


def check_b_process(fast: bool = False) -> list[CheckResult]:
    def run():
        g = TimeGrid(5.0, 0.01)
        n = _mc(5000, fast)
        band = 0.1 * (2 if fast else 1)
        rep = b_process_covariance_check(1.0, n, g, stream(SEED, 10, 0))
        d = assemble_driver(D.exponential(), g, stream(SEED, 10, 1), n, sigma2=1.0)
        QF = solve_limit_convolution(d, 1.0)[:, -1]
        X = hw_reference_diffusion(1.0, 1.0, g, stream(SEED, 10, 2), n)[:, -1]
        ks = ks_distance(QF, X)
        ks_bound = 0.05 * (2 if fast else 1)
        return [
            ("Var B(1) / (1 + s2)", rep.var_ratio, 1 + band, abs(rep.var_ratio - 1) <= band, f"band 1 +- {band}"),
            ("Cov(B(1), B(2)) / (1 + s2)", rep.cov_ratio, 1 + band, abs(rep.cov_ratio - 1) <= band,
             f"band 1 +- {band}"),
            ("KS Q_F(5) vs HW diffusion", ks, ks_bound, ks <= ks_bound, f"{n} + {n} draws"),
        ]
    return _timed(10, 300.0, run)


def m2_variance_oracle(F: D.Distribution, t: float) -> float:
    val, _ = integrate.quad(lambda u: float(F.tail(t - u) * F.cdf(t - u)), 0.0, t, epsabs=1e-12)
    return val


def m1_variance_oracle(F: D.Distribution, t: float, sigma2: float) -> float:
    val, _ = integrate.quad(lambda u: float(F.tail(u)) ** 2, 0.0, t, epsabs=1e-12)
    return sigma2 * val


def check_gaussian_driver(fast: bool = False) -> list[CheckResult]:
    def run():
        F = D.exponential()
        g = TimeGrid(2.0, 0.01)
        n = _mc(5000, fast)
        rel = 0.1 * (2 if fast else 1)
        k1 = g.index(1.0)
        m2 = float(np.var(sample_M2(F, g, stream(SEED, 11, 0), n)[:, k1], ddof=1))
        m2_ref = m2_variance_oracle(F, 1.0)
        xi = sample_xi(1.0, g, stream(SEED, 11, 1), n)
        m1 = float(np.var(compute_M1(xi, F, g)[:, k1], ddof=1))
        m1_ref = m1_variance_oracle(F, 1.0, 1.0)
        u = np.linspace(0.0, 1.0, 201)
        br = float(np.var(sample_bridge(u, stream(SEED, 11, 2), n)[:, 100], ddof=1))
        br_tol = 0.02 * (2 if fast else 1)
        return [
            ("Var M2(1) relative error", abs(m2 / m2_ref - 1), rel, abs(m2 / m2_ref - 1) <= rel,
             f"{m2:.4f} vs {m2_ref:.4f}"),
            ("Var M1(1) relative error", abs(m1 / m1_ref - 1), rel, abs(m1 / m1_ref - 1) <= rel,
             f"{m1:.4f} vs {m1_ref:.4f}"),
            ("bridge variance at 1/2", br, 0.25 + br_tol, abs(br - 0.25) <= br_tol, f"band 0.25 +- {br_tol}"),
        ]
    return _timed(11, 120.0, run)


# ---------------------------------------------------------------------------
# simulator
# ---------------------------------------------------------------------------


def check_waiting_identity(fast: bool = False) -> list[CheckResult]:
    def run():
        N, T = 10, 5.0
        rate = HWScaling(1.0, N).arrival_rate
        worst = {}
        for F in (D.deterministic(), D.exponential()):
            w = 0.0
            for r in range(20):
                cfg = SimConfig(N, RenewalArrivals(rate), F, T, q0=N + 3, seed=SEED, replication=r)
                w = max(w, verify_waiting_identity(simulate(cfg), T)[2])
            worst[F.kind] = w
        return [
            ("deterministic |lhs - rhs|", worst["deterministic"], 1e-9, worst["deterministic"] <= 1e-9, "20 logs"),
            ("exponential |lhs - rhs|", worst["exponential"], 1e-6, worst["exponential"] <= 1e-6, "20 logs"),
        ]
    return _timed(7, 10.0, run)


def check_fluid_convergence(fast: bool = False) -> list[CheckResult]:
    def run():
        rep = convergence_experiment(1.0, (25, 100, 400), _mc(50, fast), 10.0, seed=SEED,
                                     limit_draws=10, martingales=False)
        med = rep.median_fluid()
        decreasing = med[25] > med[100] > med[400]
        ratio = med[400] / med[100]
        detail = ", ".join(f"N={N}: {v:.3f}" for N, v in med.items())
        return [
            ("median fluid distance strictly decreasing", float(decreasing), 1.0, decreasing, detail),
            ("median ratio N=400 / N=100", ratio, 0.6, ratio <= 0.6, ""),
        ]
    return _timed(8, 300.0, run)


@lru_cache(maxsize=2)
def _des_at_horizon(n: int, N: int = 400, T: float = 5.0, beta: float = 1.0):
    """``(Q~(T), sqrt(N) V(T))`` over ``n`` independent M/M/N runs."""
    rate = HWScaling(beta, N).arrival_rate
    q = np.empty(n)
    v = np.empty(n)
    for r in range(n):
        log = simulate(SimConfig(N, RenewalArrivals(rate), D.exponential(), T, seed=SEED + 9, replication=r))
        q[r] = (float(log.Q(T)) - N) / math.sqrt(N)
        v[r] = math.sqrt(N) * float(virtual_wait(log, T))
    return q, v


def check_diffusion_agreement(fast: bool = False) -> list[CheckResult]:
    def run():
        n = _mc(2000, fast)
        q, _ = _des_at_horizon(n)
        d = assemble_driver(D.exponential(), TimeGrid(5.0, 0.01), stream(SEED, 9), n, sigma2=1.0)
        ks = ks_distance(q, solve_limit_convolution(d, 1.0)[:, -1])
        bound = 0.1 * (2 if fast else 1)
        return [("KS Q~N(5) vs Q_F(5), N=400", ks, bound, ks <= bound, f"{n} vs {n} draws")]
    return _timed(9, 600.0, run)


def check_virtual_wait(fast: bool = False) -> list[CheckResult]:
    def run():
        g = TimeGrid(5.0, 0.01)
        worst = 0.0
        for i, F in enumerate((D.exponential(), D.erlang(2))):
            for beta in (0.0, 1.0):
                d = assemble_driver(F, g, stream(SEED, 12, i, int(beta)), 25, sigma2=1.0, q0=normal_q0())
                V = np.maximum(solve_limit_convolution(d, beta), 0.0)
                worst = max(worst, virtual_wait_residual(d, V, beta))
        n = _mc(2000, fast)
        q, v = _des_at_horizon(n)
        ks = ks_distance(v, np.maximum(q, 0.0))
        bound = 0.1 * (2 if fast else 1)
        return [
            ("virtual-wait residual", worst, 10 * g.step, worst <= 10 * g.step, "100 drivers"),
            ("KS sqrt(N) V(5) vs Q~N+(5), N=400", ks, bound, ks <= bound, f"{n} draws"),
        ]
    return _timed(12, 600.0, run)


CHECKS: dict[int, Callable[[bool], list[CheckResult]]] = {
    1: check_sawtooth,
    2: check_equilibrium_fluid,
    3: check_renewal_function,
    4: check_key_identity,
    5: check_representations,
    6: check_regulator,
    7: check_waiting_identity,
    8: check_fluid_convergence,
    9: check_diffusion_agreement,
    10: check_b_process,
    11: check_gaussian_driver,
    12: check_virtual_wait,
}

SUITES: dict[str, tuple[int, ...]] = {
    "regulator": (6,),
    "renewal": (3, 4),
    "fluid": (1, 2, 8),
    "diffusion": (5, 10, 11),
    "simulate": (7, 9, 12),
}
SUITES["all"] = tuple(sorted(CHECKS))


def run_criterion(k: int, fast: bool = False) -> list[CheckResult]:
    return CHECKS[k](fast)


def run_suite(name: str, fast: bool = False) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    out = []
    for k in SUITES[name]:
        out.extend(run_criterion(k, fast))
    return out
