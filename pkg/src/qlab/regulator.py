"""Solvers for the regulator equation ``z(t) = x(t) + int_0^t (z(t-s) + a)^+ dB(s)``.

Three routes to the same grid fixed point:

* :func:`solve_forward` - one causal sweep, exact on the grid because ``dB_0 = 0``;
* :func:`solve_pointmass` - the shift recursion for ``B`` concentrated at one point;
* :func:`solve_picard` - successive approximations started from any path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import Distribution
from .quadrature import Path, TimeGrid, convolve_increments, grid_increments


@dataclass(frozen=True)
class RegulatorProblem:
    x: Path
    dist: Distribution
    shift: float = 0.0


@dataclass
class SolverReport:
    solution: Path
    iterations: int
    residual: float
    history: list[float] = field(default_factory=list)


class ConvergenceError(RuntimeError):
    def __init__(self, report: SolverReport, tol: float):
        super().__init__(
            f"no convergence after {report.iterations} iterations "
            f"(residual {report.residual:.3e} > tol {tol:.1e})"
        )
        self.report = report


def forward_sweep(x: np.ndarray, dB: np.ndarray, shift: float, sign: float = 1.0) -> np.ndarray:
    """Causal grid recursion ``z_k = x_k + sum_j (sign (z_{k-j} + shift))^+ dB_j``.

    ``x`` may hold a batch of paths along its first axis.  ``sign = -1`` feeds
    back the magnitude of the negative part instead of the positive part.
    """
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    dB = np.asarray(dB[:m], dtype=float)
    if dB[0] != 0:
        raise ValueError("measure has an atom at zero; the recursion is not causal")
    z = np.empty_like(x)
    pos = np.empty_like(x)
    support = np.flatnonzero(dB)
    sparse = support.size < m // 8
    for k in range(m):
        if k == 0 or (sparse and (support.size == 0 or support[0] > k)):
            acc = 0.0
        elif sparse:
            idx = support[support <= k]
            acc = pos[..., k - idx] @ dB[idx]
        else:
            acc = pos[..., k - 1::-1] @ dB[1:k + 1]
        z[..., k] = x[..., k] + acc
        pos[..., k] = np.maximum(sign * (z[..., k] + shift), 0.0)
    return z


def solve_forward(problem: RegulatorProblem) -> SolverReport:
    dB = grid_increments(problem.dist, problem.x.grid)
    z = forward_sweep(problem.x.values, dB, problem.shift)
    return SolverReport(Path(problem.x.grid, z), iterations=1, residual=0.0)


def regulate(x: Path, dist: Distribution, shift: float = 0.0) -> Path:
    """The regulator map applied to ``x`` (default solver)."""
    return solve_forward(RegulatorProblem(x, dist, shift)).solution


def solve_pointmass(x: Path, location: float, shift: float = 0.0, mass: float = 1.0) -> Path:
    """``z = x`` before ``location``, then ``z(t) = x(t) + mass * (z(t - c) + a)^+``."""
    if location <= 0:
        raise ValueError("point mass must sit strictly above zero")
    lag = int(round(location / x.grid.step))
    if lag == 0:
        raise ValueError("point mass snaps to zero on this grid")
    z = x.values.copy()
    for start in range(lag, z.size, lag):
        stop = min(start + lag, z.size)
        z[start:stop] += mass * np.maximum(z[start - lag:stop - lag] + shift, 0.0)
    return Path(x.grid, z)


def window_mass(dist: Distribution, grid: TimeGrid, delta: float) -> float:
    """``sup_y (B(y + delta) - B(y))`` over grid windows of ``round(delta/h)`` steps."""
    w = max(1, int(round(delta / grid.step)))
    c = np.cumsum(grid_increments(dist, grid))
    if w >= c.size:
        return float(c[-1])
    return float(np.max(c[w:] - c[:-w]))


def contraction_window(dist: Distribution, grid: TimeGrid, eps: float = 0.5) -> float:
    """Largest grid window whose mass never exceeds ``eps``.

    If a single grid cell already carries more than ``eps`` (a heavy atom), the
    first point of positive mass is returned instead: successive
    approximations are then exact on one more such block per iteration.
    """
    dB = grid_increments(dist, grid)
    c = np.cumsum(dB)
    if np.max(dB) > eps:
        first = np.flatnonzero(dB > 0)
        return float(first[0] * grid.step) if first.size else grid.horizon
    lo, hi = 1, grid.n
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if np.max(c[mid:] - c[:-mid]) <= eps:
            lo = mid
        else:
            hi = mid - 1
    return lo * grid.step


def default_max_iter(dist: Distribution, grid: TimeGrid) -> int:
    return 10 * math.ceil(grid.horizon / contraction_window(dist, grid))


def picard_iterates(problem: RegulatorProblem, initial: Path | None = None):
    """Yield ``u_1, u_2, ...`` of ``u_{n+1} = x + int (u_n + a)^+ dB`` as arrays."""
    dB = grid_increments(problem.dist, problem.x.grid)
    x = problem.x.values
    u = np.zeros_like(x) if initial is None else initial.values.copy()
    while True:
        u = x + convolve_increments(np.maximum(u + problem.shift, 0.0), dB)
        yield u


def solve_picard(problem: RegulatorProblem, tol: float = 1e-9,
                 max_iter: int | None = None, initial: Path | None = None) -> SolverReport:
    """Successive approximations from ``initial`` (zero by default).

    Stops once the sup-norm change of one update is at most ``tol``; raises
    :class:`ConvergenceError` if that takes more than ``max_iter`` updates.
    """
    grid = problem.x.grid
    if max_iter is None:
        max_iter = default_max_iter(problem.dist, grid)
    prev = np.zeros(grid.size) if initial is None else initial.values
    history = []
    for n, u in enumerate(picard_iterates(problem, initial), start=1):
        res = float(np.max(np.abs(u - prev)))
        history.append(res)
        prev = u
        if res <= tol:
            return SolverReport(Path(grid, u), iterations=n, residual=res, history=history)
        if n >= max_iter:
            raise ConvergenceError(SolverReport(Path(grid, u), n, res, history), tol)
