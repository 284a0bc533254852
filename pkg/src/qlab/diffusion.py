"""Diffusion limit of the many-server queue in the Halfin-Whitt regime.

The limit is driven by the Gaussian process

    zeta = M_Q + H + W0(F_e) + M1 + M2,    H = Q0 F_e_bar,   M_Q = Q0^+ (G - F_e_bar),

and solves either the convolution form ``Q = phi_F^0(zeta - beta F_e)`` or the
renewal form ``Q = zeta + zeta * dM - beta t - Q^- * dM`` with ``Q^- = min(Q, 0)``.
All samplers accept a ``size`` and return arrays with replications along the
first axis, so many drivers are solved in one batched sweep.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import linalg

from .distributions import Distribution, require_unit_mean
from .quadrature import Path, TimeGrid, convolve_increments, grid_equilibrium, grid_increments, tail_integral_values
from .regulator import forward_sweep
from .renewal import RenewalFunction, renewal_convolve

# largest grid on which the M2 covariance is factorised directly
COV_GRID_CAP = 4096
JITTER = 1e-10

Q0Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class HWScaling:
    beta: float
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("need at least one server")
        if self.rho <= 0:
            raise ValueError(f"beta = {self.beta} gives nonpositive load at N = {self.N}")

    @property
    def rho(self) -> float:
        return 1.0 - self.beta / math.sqrt(self.N)

    @property
    def arrival_rate(self) -> float:
        """Total arrival rate ``N rho`` for mean-one service."""
        return self.N * self.rho


def point_mass_q0(value: float = 0.0) -> Q0Sampler:
    return lambda rng, size: np.full(size, float(value))


def normal_q0(mean: float = 0.0, sd: float = 1.0) -> Q0Sampler:
    return lambda rng, size: rng.normal(mean, sd, size)


# ---------------------------------------------------------------------------
# Gaussian components
# ---------------------------------------------------------------------------


def sample_bridge(Fe: np.ndarray, rng: np.random.Generator, size: int) -> np.ndarray:
    """Brownian bridge time-changed by the nondecreasing array ``Fe`` (values in [0, 1])."""
    u = np.clip(np.asarray(Fe, dtype=float), 0.0, 1.0)
    if np.any(np.diff(u) < 0):
        raise ValueError("time change must be nondecreasing")
    du = np.diff(u, prepend=0.0)
    W = np.cumsum(rng.standard_normal((size, u.size)) * np.sqrt(du), axis=1)
    W1 = W[:, -1:] + rng.standard_normal((size, 1)) * math.sqrt(max(1.0 - u[-1], 0.0))
    return W - u * W1


def sample_xi(sigma2: float, grid: TimeGrid, rng: np.random.Generator, size: int,
              cov: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Arrival noise: Brownian motion of variance ``sigma2`` per unit time.

    ``cov(s, t)`` replaces the Brownian covariance when the arrival stream is
    a superposition whose limit is not a Brownian motion.
    """
    if cov is not None:
        s, t = np.meshgrid(grid.t, grid.t, indexing="ij")
        return sample_gaussian(cov(s, t), rng, size)
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    inc = rng.standard_normal((size, grid.n)) * math.sqrt(sigma2 * grid.step)
    return np.concatenate([np.zeros((size, 1)), np.cumsum(inc, axis=1)], axis=1)


def compute_M1(xi: np.ndarray, F: Distribution, grid: TimeGrid) -> np.ndarray:
    """``int_0^t G(t-s) d xi(s)`` through integration by parts."""
    return tail_integral_values(xi, F, grid)


def m2_covariance(F: Distribution, grid: TimeGrid, refine: int | None = None) -> np.ndarray:
    """``Gamma(s, t) = int_0^s G(t-u) F(s-u) du`` for ``s <= t``, trapezoid rule.

    Column ``L`` of lags is one cumulative integral ``s -> int_0^s G(Lh + v) F(v) dv``
    on a grid ``refine`` times finer than ``grid``.
    """
    n, h = grid.size, grid.step
    if refine is None:
        refine = int(min(8, max(2, 2e7 // (n * n))))
    v = np.arange((n - 1) * refine + 1) * (h / refine)
    Fv = F.cdf(v)
    out = np.zeros((n, n))
    for L in range(n):
        f = F.tail(L * h + v[: (n - 1 - L) * refine + 1]) * Fv[: (n - 1 - L) * refine + 1]
        c = np.concatenate([[0.0], np.cumsum(f[1:] + f[:-1]) * (h / refine / 2)])
        col = c[::refine]
        i = np.arange(n - L)
        out[i, i + L] = col
        out[i + L, i] = col
    return out


class CovarianceError(ArithmeticError):
    pass


def factorize(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of ``cov`` with zero rows kept as zero.

    Rows with zero variance (such as ``t = 0``) are dropped before factoring.
    A diagonal jitter of at most ``JITTER`` times the largest variance is
    tried once; failure after that means the covariance is not positive
    semidefinite and signals a quadrature problem upstream.
    """
    diag = np.diag(cov)
    keep = np.flatnonzero(diag > 0)
    sub = cov[np.ix_(keep, keep)]
    L = np.zeros_like(cov)
    for jitter in (0.0, JITTER * float(diag.max(initial=0.0))):
        try:
            Ls = linalg.cholesky(sub + jitter * np.eye(keep.size), lower=True)
            break
        except linalg.LinAlgError:
            continue
    else:
        w = np.linalg.eigvalsh(sub)
        raise CovarianceError(f"covariance not PSD: smallest eigenvalue {w.min():.3e}")
    L[np.ix_(keep, keep)] = Ls
    return L


def sample_gaussian(cov: np.ndarray, rng: np.random.Generator, size: int) -> np.ndarray:
    L = factorize(cov)
    return rng.standard_normal((size, cov.shape[0])) @ L.T


@lru_cache(maxsize=16)
def _m2_factor(F: Distribution, grid: TimeGrid) -> np.ndarray:
    L = factorize(m2_covariance(F, grid))
    L.setflags(write=False)
    return L


def sample_M2(F: Distribution, grid: TimeGrid, rng: np.random.Generator, size: int) -> np.ndarray:
    """Centred Gaussian paths with covariance :func:`m2_covariance`.

    Grids above ``COV_GRID_CAP`` points are sampled on the coarsest multiple
    of the step that fits and interpolated linearly (error O(step)).
    """
    require_unit_mean(F)
    coarse = grid
    factor = 1
    while coarse.size > COV_GRID_CAP:
        factor += 1
        coarse = TimeGrid(grid.horizon, grid.step * factor)
    L = _m2_factor(F, coarse)
    z = rng.standard_normal((size, coarse.size)) @ L.T
    if coarse is grid:
        return z
    return np.stack([np.interp(grid.t, coarse.t, row) for row in z])


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DriverSample:
    """A batch of drivers; every array has replications along axis 0."""

    grid: TimeGrid
    service: Distribution
    q0: np.ndarray
    H: np.ndarray
    M_Q: np.ndarray
    bridge: np.ndarray
    xi: np.ndarray
    M1: np.ndarray
    M2: np.ndarray

    @property
    def size(self) -> int:
        return self.q0.shape[0]

    @property
    def Q_I(self) -> np.ndarray:
        return self.H + self.bridge + self.M1 + self.M2

    @property
    def zeta(self) -> np.ndarray:
        return self.M_Q + self.Q_I

    def path(self, name: str, i: int = 0) -> Path:
        return Path(self.grid, getattr(self, name)[i])


def assemble_driver(F: Distribution, grid: TimeGrid, rng: np.random.Generator, size: int,
                    sigma2: float = 1.0, q0: Q0Sampler | None = None,
                    noise: bool = True, xi_cov=None) -> DriverSample:
    """Draw ``size`` drivers; the four random inputs use independent child streams.

    ``noise=False`` zeroes the bridge, arrival noise and M2 (``Q0`` is still drawn).
    """
    q_rng, b_rng, x_rng, m_rng = rng.spawn(4)
    q0 = q0 or point_mass_q0(0.0)
    t = grid.t
    Fe = F.equilibrium_cdf(t)
    G = F.tail(t)
    Q0 = np.asarray(q0(q_rng, size), dtype=float).reshape(size)
    H = Q0[:, None] * (1.0 - Fe)
    M_Q = np.maximum(Q0, 0.0)[:, None] * (G - (1.0 - Fe))
    if noise:
        bridge = sample_bridge(Fe, b_rng, size)
        xi = sample_xi(sigma2, grid, x_rng, size, cov=xi_cov)
        M2 = sample_M2(F, grid, m_rng, size)
    else:
        bridge = xi = M2 = np.zeros((size, grid.size))
    M1 = compute_M1(xi, F, grid)
    return DriverSample(grid, F, Q0, H, M_Q, bridge, xi, M1, M2)


def zero_driver(F: Distribution, grid: TimeGrid, zeta: np.ndarray) -> DriverSample:
    """Driver whose total ``zeta`` is the given array (placed in ``H``); for tests and demos."""
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    z = np.zeros_like(zeta)
    return DriverSample(grid, F, zeta[:, 0].copy(), zeta, z, z, z, z, z)


# ---------------------------------------------------------------------------
# limit equations
# ---------------------------------------------------------------------------


def drift_profile(F: Distribution, grid: TimeGrid) -> np.ndarray:
    """F_e in the form consistent with the grid convolution algebra."""
    return grid_equilibrium(F, grid)


def solve_limit_convolution(d: DriverSample, beta: float) -> np.ndarray:
    """``phi_F^0(zeta - beta F_e)`` for every driver in the batch."""
    x = d.zeta - beta * drift_profile(d.service, d.grid)
    return forward_sweep(x, grid_increments(d.service, d.grid), 0.0)


def solve_limit_renewal(d: DriverSample, beta: float, M: RenewalFunction) -> np.ndarray:
    """Renewal form, solved by one causal sweep.

    Since ``-Q^- = (-Q)^+``, the equation is ``Q = base + int (-Q)^+ dM``: the
    regulator recursion against ``dM`` fed by the negative part.
    """
    if M.grid != d.grid:
        raise ValueError("renewal function lives on a different grid")
    dM = M.increments
    base = d.zeta + renewal_convolve(d.zeta, M) - beta * d.grid.t
    return forward_sweep(base, dM, 0.0, sign=-1.0)


def virtual_wait_limit(d: DriverSample, Q: np.ndarray, beta: float,
                       bound: float | None = None) -> np.ndarray:
    """``V = Q^+``, checked against ``V = (zeta - beta F_e + V * dF)^+``."""
    V = np.maximum(Q, 0.0)
    res = virtual_wait_residual(d, V, beta)
    bound = 10 * d.grid.step if bound is None else bound
    if res > bound:
        raise ArithmeticError(f"virtual-wait residual {res:.3e} exceeds {bound:.1e}")
    return V


def virtual_wait_residual(d: DriverSample, V: np.ndarray, beta: float) -> float:
    dF = grid_increments(d.service, d.grid)
    rhs = d.zeta - beta * drift_profile(d.service, d.grid) + convolve_increments(V, dF)
    return float(np.max(np.abs(V - np.maximum(rhs, 0.0))))


def hw_drift(x: np.ndarray, beta: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, -beta, -x - beta)


def hw_reference_diffusion(beta: float, sigma2: float, grid: TimeGrid, rng: np.random.Generator,
                           size: int, q0: Q0Sampler | None = None, noise: bool = True) -> np.ndarray:
    """Euler-Maruyama paths of ``dX = m(X) dt + sqrt(1 + sigma2) dW``."""
    q0 = q0 or point_mass_q0(0.0)
    q_rng, w_rng = rng.spawn(2)
    X = np.empty((size, grid.size))
    X[:, 0] = q0(q_rng, size)
    h = grid.step
    scale = math.sqrt((1.0 + sigma2) * h) if noise else 0.0
    for k in range(grid.n):
        dW = w_rng.standard_normal(size) * scale if noise else 0.0
        X[:, k + 1] = X[:, k] + hw_drift(X[:, k], beta) * h + dW
    return X


def b_process(d: DriverSample) -> np.ndarray:
    """``B(t) = zeta(t) + int_0^t zeta(s) ds`` (left Riemann sum)."""
    z = d.zeta
    integral = np.concatenate([np.zeros((z.shape[0], 1)), np.cumsum(z[:, :-1], axis=1)], axis=1)
    return z + integral * d.grid.step


@dataclass(frozen=True)
class BProcessReport:
    var_ratio: float
    cov_ratio: float
    max_rel_dev: float
    lattice: tuple[float, ...]


def b_process_covariance_check(sigma2: float, samples: int, grid: TimeGrid, rng: np.random.Generator,
                               q0: Q0Sampler | None = None,
                               lattice: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0)) -> BProcessReport:
    """Compare ``Cov(B(s), B(t))`` with ``(1 + sigma2) min(s, t)`` for exponential service."""
    from .distributions import exponential

    d = assemble_driver(exponential(), grid, rng, samples, sigma2=sigma2, q0=q0)
    B = b_process(d)
    idx = [grid.index(s) for s in lattice]
    C = np.cov(B[:, idx], rowvar=False)
    target = (1.0 + sigma2) * np.minimum.outer(np.asarray(lattice), np.asarray(lattice))
    rel = np.abs(C / target - 1.0)
    i1, i2 = idx[0], grid.index(2.0) if 2.0 <= grid.horizon else idx[-1]
    c12 = np.cov(B[:, i1], B[:, i2])[0, 1]
    return BProcessReport(
        var_ratio=float(np.var(B[:, i1], ddof=1) / ((1.0 + sigma2) * lattice[0])),
        cov_ratio=float(c12 / ((1.0 + sigma2) * lattice[0])),
        max_rel_dev=float(rel.max()),
        lattice=tuple(lattice),
    )
