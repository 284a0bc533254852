"""Uniform time grids, grid paths and Riemann-Stieltjes convolution.

A :class:`Path` is a cadlag function sampled on a :class:`TimeGrid` and read as
piecewise constant between grid points.  Convolutions against a law ``B`` use
the grid increments ``dB_j = B(t_j) - B(t_{j-1})``, with every atom of ``B``
snapped to its nearest grid point so that jumps stay sharp.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import toeplitz

from .distributions import Distribution

# dense Toeplitz products are used for batches up to this many grid points
_DENSE_LIMIT = 2048


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    step: float

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("grid step must be positive")
        if self.horizon < self.step:
            raise ValueError("horizon must be at least one step")

    @property
    def n(self) -> int:
        """Index of the last grid point (there are ``n + 1`` points)."""
        ratio = self.horizon / self.step
        k = round(ratio)
        return int(k) if abs(ratio - k) < 1e-9 * max(1.0, ratio) else math.ceil(ratio)

    @property
    def size(self) -> int:
        return self.n + 1

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.size) * self.step

    def index(self, t: float) -> int:
        """Nearest grid index of time ``t``."""
        k = int(round(t / self.step))
        if not 0 <= k <= self.n:
            raise ValueError(f"time {t} lies outside the grid [0, {self.n * self.step}]")
        return k

    def refine(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.horizon, self.step / factor)


@dataclass(frozen=True, eq=False)
class Path:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"path has {v.shape} values, grid has {self.grid.size} points")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "Path":
        return cls(grid, np.broadcast_to(np.asarray(fn(grid.t), dtype=float), (grid.size,)).copy())

    @classmethod
    def constant(cls, grid: TimeGrid, c: float) -> "Path":
        return cls(grid, np.full(grid.size, float(c)))

    @classmethod
    def identity(cls, grid: TimeGrid) -> "Path":
        return cls(grid, grid.t)

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    def at(self, t: float) -> float:
        """Cadlag evaluation: value at the last grid point not after ``t``."""
        k = min(int(math.floor(t / self.grid.step + 1e-9)), self.grid.n)
        return float(self.values[k])

    def sup(self, upto: float | None = None) -> float:
        v = self.values if upto is None else self.values[: self.grid.index(upto) + 1]
        return float(np.max(np.abs(v)))

    def positive(self) -> "Path":
        return Path(self.grid, np.maximum(self.values, 0.0))

    def negative(self) -> "Path":
        """``min(x, 0)``, the convention used for the renewal-form equation."""
        return Path(self.grid, np.minimum(self.values, 0.0))

    def _check(self, other: "Path") -> None:
        if other.grid != self.grid:
            raise ValueError("paths live on different grids")

    def __add__(self, other):
        if isinstance(other, Path):
            self._check(other)
            return Path(self.grid, self.values + other.values)
        return Path(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Path):
            self._check(other)
            return Path(self.grid, self.values - other.values)
        return Path(self.grid, self.values - other)

    def __rsub__(self, other):
        return Path(self.grid, other - self.values)

    def __mul__(self, c):
        return Path(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return Path(self.grid, -self.values)

    def __repr__(self):
        return f"Path(T={self.grid.horizon}, h={self.grid.step}, sup={self.sup():.4g})"


def distance(x: Path, y: Path) -> float:
    """Sup-norm distance over the common grid."""
    x._check(y)
    return float(np.max(np.abs(x.values - y.values)))


# ---------------------------------------------------------------------------
# grid measures
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _increments(dist: Distribution, grid: TimeGrid) -> np.ndarray:
    t = grid.t
    cont = np.asarray(dist.continuous_cdf(t), dtype=float)
    d = np.zeros(grid.size)
    d[1:] = np.diff(cont)
    for p, c in dist.atoms:
        k = int(round(p / grid.step))
        if k == 0:
            raise ValueError(f"atom at {p} snaps to t = 0 on a grid with step {grid.step}")
        if k <= grid.n:
            d[k] += c
    d.setflags(write=False)
    return d


def grid_increments(dist: Distribution, grid: TimeGrid) -> np.ndarray:
    """``dB_j = B(t_j) - B(t_{j-1})`` for ``j >= 1`` with ``dB_0 = 0``; atoms snapped."""
    if float(dist.cdf(0.0)) > 0:
        raise ValueError("law has mass at zero; grid recursions need F(0) = 0")
    return _increments(dist, grid)


def grid_cdf(dist: Distribution, grid: TimeGrid) -> np.ndarray:
    """The law's CDF as seen by the grid (cumulative snapped increments)."""
    return np.cumsum(grid_increments(dist, grid))


def convolve_increments(values: np.ndarray, dB: np.ndarray) -> np.ndarray:
    """``out[..., k] = sum_{j=1..k} values[..., k-j] * dB[j]`` along the last axis."""
    values = np.asarray(values, dtype=float)
    m = values.shape[-1]
    if values.ndim == 1:
        return np.convolve(values, dB[:m])[:m]
    flat = values.reshape(-1, m)
    if m <= _DENSE_LIMIT:
        # upper-triangular Toeplitz: L[i, k] = dB[k - i] for k >= i
        L = toeplitz(np.zeros(m), dB[:m])
        out = flat @ L
    else:
        out = np.stack([np.convolve(row, dB[:m])[:m] for row in flat])
    return out.reshape(values.shape)


def stieltjes_conv(g: Path, dist: Distribution) -> Path:
    """``t_k -> int_0^{t_k} g(t_k - s) dB(s)`` with left-endpoint evaluation of ``g``."""
    dB = grid_increments(dist, g.grid)
    return Path(g.grid, convolve_increments(g.values, dB))


def tail_integral_by_parts(x: Path, dist: Distribution) -> Path:
    """``t -> int_0^t G(t - s) dx(s)`` through integration by parts.

    Evaluated as ``G(0) x(t) - x(0) G(t) - int_0^t x(t - s) dF(s)``; the last
    term is the grid Stieltjes convolution, and ``G`` is the grid tail, so the
    identity path maps to ``t - int_0^t (t - s) dF(s)``, the grid version of F_e.
    """
    return Path(x.grid, tail_integral_values(x.values, dist, x.grid))


def tail_integral_values(values: np.ndarray, dist: Distribution, grid: TimeGrid) -> np.ndarray:
    """Array form of :func:`tail_integral_by_parts`; batches along the last axis."""
    values = np.asarray(values, dtype=float)
    dB = grid_increments(dist, grid)
    tail = 1.0 - np.cumsum(dB)
    x0 = values[..., :1]
    return values - x0 * tail - convolve_increments(values, dB)


def grid_equilibrium(dist: Distribution, grid: TimeGrid) -> np.ndarray:
    """F_e on the grid as the tail integral of the identity path.

    This is the representation of F_e that is consistent with the grid
    convolution algebra: ``F_e^h + F_e^h * dM^h = t`` holds exactly when ``M^h``
    is the grid renewal function of the same law.
    """
    return tail_integral_values(grid.t, dist, grid)
