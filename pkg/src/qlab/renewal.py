"""Renewal function ``M = F + M * dF`` and renewal-type equations on a grid."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .distributions import Distribution
from .quadrature import Path, TimeGrid, convolve_increments, grid_increments


@dataclass(frozen=True, eq=False)
class RenewalFunction:
    grid: TimeGrid
    values: np.ndarray
    dist: Distribution

    @property
    def increments(self) -> np.ndarray:
        dM = np.diff(self.values, prepend=0.0)
        dM[0] = 0.0
        return dM

    def path(self) -> Path:
        return Path(self.grid, self.values)


def _recursion(dF: np.ndarray) -> np.ndarray:
    """Forward sweep of ``M_k = F_k + sum_{j=1..k} M_{k-j} dF_j``."""
    F = np.cumsum(dF)
    M = np.zeros_like(F)
    support = np.flatnonzero(dF)
    for k in range(1, F.size):
        idx = support[support <= k]
        M[k] = F[k] + M[k - idx] @ dF[idx]
    return M


def _recursion_dense(dF: np.ndarray) -> np.ndarray:
    F = np.cumsum(dF)
    M = np.zeros_like(F)
    for k in range(1, F.size):
        M[k] = F[k] + M[k - 1::-1] @ dF[1:k + 1]
    return M


@lru_cache(maxsize=32)
def renewal_function(F: Distribution, grid: TimeGrid) -> RenewalFunction:
    """Grid renewal function of ``F``; cached per ``(F, grid)`` and read-only."""
    dF = grid_increments(F, grid)
    atoms = F.atoms
    if len(atoms) == 1 and atoms[0][1] == 1.0:
        # single atom at c: M(t) = floor(t / c), exact on the grid
        lag = int(round(atoms[0][0] / grid.step))
        M = np.floor(np.arange(grid.size) / lag)
    elif np.count_nonzero(dF) < grid.size // 8:
        M = _recursion(dF)
    else:
        M = _recursion_dense(dF)
    M.setflags(write=False)
    return RenewalFunction(grid, M, F)


def renewal_convolve(values: np.ndarray, M: RenewalFunction) -> np.ndarray:
    """``t -> int_0^t g(t - u) dM(u)`` on the grid; batches along the last axis."""
    return convolve_increments(values, M.increments)


def solve_renewal_type(H: Path, F: Distribution, check: bool = True) -> Path:
    """Solution ``r = H + H * dM`` of ``r = H + r * dF``.

    With ``check`` the result is substituted back into ``r = H + r * dF`` and
    a residual above ``10 h`` raises.
    """
    M = renewal_function(F, H.grid)
    r = H.values + renewal_convolve(H.values, M)
    if check:
        res = renewal_residual(r, H.values, F, H.grid)
        if res > 10 * H.grid.step:
            raise ArithmeticError(f"renewal-type residual {res:.3e} exceeds 10h")
    return Path(H.grid, r)


def renewal_residual(r: np.ndarray, H: np.ndarray, F: Distribution, grid: TimeGrid) -> float:
    dF = grid_increments(F, grid)
    return float(np.max(np.abs(r - H - convolve_increments(r, dF))))


def key_identity_residual(F: Distribution, grid: TimeGrid) -> float:
    """``sup_k |F_e(t_k) + (F_e * dM)(t_k) - t_k|`` with the closed-form F_e."""
    Fe = F.equilibrium_cdf(grid.t)
    M = renewal_function(F, grid)
    return float(np.max(np.abs(Fe + renewal_convolve(Fe, M) - grid.t)))
