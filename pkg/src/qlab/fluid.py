"""Fluid limit of the many-server queue.

The limit solves ``Q(t) = x(t) + int_0^t (Q(t-s) - 1)^+ dF(s)`` with free path

    x(t) = min(Q0, 1) F0_bar(t) + (Q0 - 1)^+ G(t) + int_0^t G(t-s) dA(s),

so ``Q = phi_F^{-1}(x)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import Distribution, Equilibrium
from .quadrature import Path, TimeGrid, convolve_increments, grid_equilibrium, grid_increments, tail_integral_by_parts
from .regulator import regulate


@dataclass(frozen=True)
class FluidProblem:
    """``init=None`` means the equilibrium law of ``service``; ``arrivals=None`` means ``A(t) = t``."""

    q0: float
    service: Distribution
    init: Distribution | None = None
    arrivals: Path | None = None

    def __post_init__(self):
        if self.q0 < 0:
            raise ValueError("initial fluid level must be nonnegative")
        if self.arrivals is not None:
            a = self.arrivals.values
            if a[0] < 0 or np.any(np.diff(a) < 0):
                raise ValueError("arrival path must be nondecreasing and start nonnegative")


@dataclass(frozen=True)
class FluidSolution:
    Q: Path
    in_service: Path
    waiting: Path
    infinite_server: Path
    adjustment: Path

    def terms(self) -> list[Path]:
        return [self.in_service, self.waiting, self.infinite_server, self.adjustment]


def initial_tail(p: FluidProblem, grid: TimeGrid) -> np.ndarray:
    """Tail of the residual-service law on the grid.

    The equilibrium law of the service law is represented by its grid form, so
    that it cancels the infinite-server term of stationary arrivals exactly.
    """
    init = p.init
    if init is None or (isinstance(init, Equilibrium) and init.base == p.service):
        return 1.0 - grid_equilibrium(p.service, grid)
    return np.asarray(init.tail(grid.t), dtype=float)


def fluid_limit(p: FluidProblem, grid: TimeGrid) -> FluidSolution:
    arrivals = p.arrivals if p.arrivals is not None else Path.identity(grid)
    if arrivals.grid != grid:
        raise ValueError("arrival path lives on a different grid")
    G = 1.0 - np.cumsum(grid_increments(p.service, grid))
    t1 = Path(grid, min(p.q0, 1.0) * initial_tail(p, grid))
    t2 = Path(grid, max(p.q0 - 1.0, 0.0) * G)
    t3 = tail_integral_by_parts(arrivals, p.service)
    Q = regulate(t1 + t2 + t3, p.service, shift=-1.0)
    t4 = Q - (t1 + t2 + t3)
    return FluidSolution(Q, t1, t2, t3, t4)


def adjustment_term(Q: Path, service: Distribution) -> Path:
    """``int_0^t (Q(t-s) - 1)^+ dF(s)`` recomputed from ``Q``."""
    dF = grid_increments(service, Q.grid)
    return Path(Q.grid, convolve_increments(np.maximum(Q.values - 1.0, 0.0), dF))


def equilibrium_check(F: Distribution, grid: TimeGrid) -> float:
    """``sup |Q - 1|`` for ``Q0 = 1``, equilibrium residuals and ``A(t) = t``."""
    sol = fluid_limit(FluidProblem(1.0, F), grid)
    return float(np.max(np.abs(sol.Q.values - 1.0)))
