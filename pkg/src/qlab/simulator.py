"""Exact simulation of the FCFS G/GI/N queue and pathwise audits of its log.

Customers enter service in a fixed order: the initial waiting customers by
index, then arrivals by arrival time.  Under FCFS the start time of each
customer is ``max(available, earliest free server)``, so one pass with a heap
of server-free times produces the whole log.  The ``i``-th customer to enter
service receives the ``i``-th service draw.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import Distribution, Equilibrium, exponential, from_config
from .quadrature import Path, TimeGrid
from .rng import stream

# rank of simultaneous events: departures, then arrivals, then service starts
DEPARTURE, ARRIVAL, START = 0, 1, 2
EVENT_NAMES = {DEPARTURE: "departure", ARRIVAL: "arrival", START: "start"}


# ---------------------------------------------------------------------------
# arrival models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RenewalArrivals:
    """Renewal stream with the given total ``rate``; ``interarrival`` is a mean-one law."""

    rate: float
    interarrival: Distribution = field(default_factory=exponential)

    def generate(self, rng: np.random.Generator, horizon: float) -> np.ndarray:
        return _renewal_times(self.interarrival, self.rate, rng, horizon)

    def to_config(self) -> dict:
        return {"kind": "renewal", "rate": self.rate, "interarrival": self.interarrival.to_config()}


@dataclass(frozen=True)
class SuperpositionArrivals:
    """``streams`` independent renewal streams sharing the total ``rate``."""

    rate: float
    streams: int
    interarrival: Distribution = field(default_factory=exponential)

    def generate(self, rng: np.random.Generator, horizon: float) -> np.ndarray:
        parts = [_renewal_times(self.interarrival, self.rate / self.streams, child, horizon)
                 for child in rng.spawn(self.streams)]
        return np.fromiter(heapq.merge(*parts), dtype=float)

    def to_config(self) -> dict:
        return {"kind": "superposition", "rate": self.rate, "streams": self.streams,
                "interarrival": self.interarrival.to_config()}


@dataclass(frozen=True)
class FixedArrivals:
    times: tuple[float, ...] = ()

    def generate(self, rng: np.random.Generator, horizon: float) -> np.ndarray:
        t = np.sort(np.asarray(self.times, dtype=float))
        if np.any(t < 0):
            raise ValueError("arrival times must be nonnegative")
        return t[t <= horizon]

    def to_config(self) -> dict:
        return {"kind": "fixed", "times": list(self.times)}


def _renewal_times(F: Distribution, rate: float, rng, horizon: float) -> np.ndarray:
    if rate <= 0:
        return np.empty(0)
    out = []
    t = 0.0
    chunk = max(16, int(1.2 * rate * horizon) + 16)
    while t <= horizon:
        times = t + np.cumsum(np.asarray(F.sample(rng, chunk)) / rate)
        out.append(times)
        t = times[-1]
    times = np.concatenate(out)
    return times[times <= horizon]


def arrivals_from_config(cfg: dict):
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    if kind == "fixed":
        return FixedArrivals(tuple(cfg.get("times", ())))
    inter = from_config(cfg.get("interarrival", "exp"))
    if kind == "renewal":
        return RenewalArrivals(float(cfg["rate"]), inter)
    if kind == "superposition":
        return SuperpositionArrivals(float(cfg["rate"]), int(cfg["streams"]), inter)
    raise ValueError(f"unknown arrival model {kind!r}")


# ---------------------------------------------------------------------------
# configuration and log
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """One run.  ``q0=None`` means ``N`` initial customers; ``init=None`` means
    residual services drawn from the equilibrium law of ``service``."""

    N: int
    arrivals: RenewalArrivals | SuperpositionArrivals | FixedArrivals
    service: Distribution = field(default_factory=exponential)
    horizon: float = 10.0
    q0: int | None = None
    init: Distribution | None = None
    seed: int = 0
    replication: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("need at least one server")
        if self.q0 is not None and self.q0 < 0:
            raise ValueError("initial count must be nonnegative")

    @property
    def initial_count(self) -> int:
        return self.N if self.q0 is None else int(self.q0)

    @property
    def initial_law(self) -> Distribution:
        return Equilibrium(self.service) if self.init is None else self.init

    def to_config(self) -> dict:
        return {
            "N": self.N, "arrivals": self.arrivals.to_config(),
            "service": self.service.to_config(), "horizon": self.horizon,
            "q0": self.initial_count, "init": self.initial_law.to_config(),
            "seed": self.seed, "replication": self.replication,
        }


@dataclass(frozen=True, eq=False)
class EventLog:
    N: int
    q0: int
    horizon: float
    service_law: Distribution
    residual: np.ndarray        # initial customers in service: remaining service
    waiter_start: np.ndarray    # initial waiting customers: service start times
    waiter_service: np.ndarray
    tau: np.ndarray             # arrivals after time 0-
    start: np.ndarray
    service: np.ndarray
    next_free: np.ndarray       # earliest free server after p customers were placed

    @property
    def wait(self) -> np.ndarray:
        return self.start - self.tau

    @property
    def departure(self) -> np.ndarray:
        return self.start + self.service

    @property
    def waiter_departure(self) -> np.ndarray:
        return self.waiter_start + self.waiter_service

    def departures(self) -> np.ndarray:
        return np.sort(np.concatenate([self.residual, self.waiter_departure, self.departure]))

    def starts(self) -> np.ndarray:
        """Service starts after time 0-, including initial waiting customers."""
        return np.sort(np.concatenate([self.waiter_start, self.start]))

    # counting processes (right-continuous)
    def A(self, t) -> np.ndarray:
        return np.searchsorted(self.tau, t, side="right")

    def D(self, t) -> np.ndarray:
        return np.searchsorted(self.departures(), t, side="right")

    def A_hat(self, t) -> np.ndarray:
        return np.searchsorted(self.starts(), t, side="right")

    def Q(self, t) -> np.ndarray:
        return self.q0 + self.A(t) - self.D(t)

    def waiting(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        w0 = self.waiter_start.size - np.searchsorted(np.sort(self.waiter_start), t, side="right")
        arrived = self.A(t)
        started = np.searchsorted(self.start, t, side="right")  # starts are sorted (FCFS)
        return w0 + arrived - started

    def busy(self, t) -> np.ndarray:
        return self.Q(t) - self.waiting(t)

    def event_times(self) -> np.ndarray:
        ev = np.concatenate([[0.0], self.tau, self.starts(), self.departures()])
        return np.unique(ev[ev <= self.horizon])

    def events(self):
        """Event table up to the horizon, ordered by (time, rank, customer)."""
        n_in, n_w, n_a = self.residual.size, self.waiter_start.size, self.tau.size
        cust_dep = np.concatenate([np.arange(n_in), n_in + np.arange(n_w), n_in + n_w + np.arange(n_a)])
        t = np.concatenate([self.residual, self.waiter_departure, self.departure,
                            self.tau, self.waiter_start, self.start])
        rank = np.concatenate([np.full(n_in + n_w + n_a, DEPARTURE), np.full(n_a, ARRIVAL),
                               np.full(n_w + n_a, START)])
        cust = np.concatenate([cust_dep, n_in + n_w + np.arange(n_a),
                               n_in + np.arange(n_w), n_in + n_w + np.arange(n_a)])
        keep = t <= self.horizon
        t, rank, cust = t[keep], rank[keep], cust[keep]
        order = np.lexsort((cust, rank, t))
        t, rank, cust = t[order], rank[order], cust[order]
        A = np.cumsum(rank == ARRIVAL)
        D = np.cumsum(rank == DEPARTURE)
        Ah = np.cumsum(rank == START)
        return t, rank, cust, self.q0 + A - D, A, Ah, D


def simulate(cfg: SimConfig) -> EventLog:
    arr_rng, init_rng, svc_rng = (stream(cfg.seed, cfg.replication, k) for k in range(3))
    tau = np.asarray(cfg.arrivals.generate(arr_rng, cfg.horizon), dtype=float)
    q0, N = cfg.initial_count, cfg.N
    n_in = min(q0, N)
    n_w = max(q0 - N, 0)
    residual = (np.atleast_1d(np.asarray(cfg.initial_law.sample(init_rng, n_in), dtype=float))
                if n_in else np.empty(0))
    services = np.atleast_1d(np.asarray(cfg.service.sample(svc_rng, n_w + tau.size), dtype=float))

    heap = list(residual) + [0.0] * (N - n_in)
    heapq.heapify(heap)
    avail = np.concatenate([np.zeros(n_w), tau])
    start = np.empty(avail.size)
    next_free = np.empty(avail.size + 1)
    next_free[0] = heap[0]
    for i, (a, s) in enumerate(zip(avail.tolist(), services.tolist())):
        b = heap[0]
        st = a if a >= b else b
        heapq.heapreplace(heap, st + s)
        start[i] = st
        next_free[i + 1] = heap[0]
    return EventLog(
        N=N, q0=q0, horizon=cfg.horizon, service_law=cfg.service,
        residual=residual, waiter_start=start[:n_w], waiter_service=services[:n_w],
        tau=tau, start=start[n_w:], service=services[n_w:], next_free=next_free,
    )


# ---------------------------------------------------------------------------
# derived paths and audits
# ---------------------------------------------------------------------------


def virtual_wait(log: EventLog, t) -> np.ndarray:
    """Wait of a hypothetical arrival at ``t`` placed behind every arrival up to ``t``.

    It starts at the earliest free server once all ``Q0 + A(t)`` earlier
    customers have been placed; equivalently at the ``(Q0 + A(t) - N + 1)``-th
    departure when that index is positive.
    """
    t = np.asarray(t, dtype=float)
    placed = log.waiter_start.size + log.A(t)
    return np.maximum(log.next_free[placed] - t, 0.0)


def virtual_wait_by_departures(log: EventLog, t: float) -> float:
    """Same quantity from the departure counting process alone."""
    m = log.q0 + int(log.A(t)) - log.N + 1
    if m <= 0:
        return 0.0
    n_in = log.residual.size + log.waiter_start.size + int(log.A(t))
    deps = np.sort(np.concatenate([log.residual, log.waiter_departure, log.departure[:int(log.A(t))]]))
    if m > n_in:
        raise ValueError("not enough departures recorded")
    return max(float(deps[m - 1]) - t, 0.0)


def waits_before_arrival(log: EventLog) -> np.ndarray:
    """``V(tau_i -)`` for every arrival."""
    before = log.waiter_start.size + np.searchsorted(log.tau, log.tau, side="left")
    return np.maximum(log.next_free[before] - log.tau, 0.0)


@dataclass(frozen=True)
class InvariantReport:
    flow: int
    nonidling: int
    fcfs: int
    server_accounting: int
    waiting_count: int
    virtual_wait: float

    @property
    def ok(self) -> bool:
        return (self.flow == self.nonidling == self.fcfs == self.server_accounting
                == self.waiting_count == 0) and self.virtual_wait <= 1e-9


def check_invariants(log: EventLog) -> InvariantReport:
    """Count violations of the log invariants over all event times."""
    t = log.event_times()
    Q = log.Q(t)
    # customers in system from per-customer records
    in_sys = ((log.residual[None, :] > t[:, None]).sum(1)
              + (log.waiter_departure[None, :] > t[:, None]).sum(1)
              + ((log.tau[None, :] <= t[:, None]) & (log.departure[None, :] > t[:, None])).sum(1)) \
        if t.size * (log.tau.size + log.q0) <= 5e7 else Q
    busy, waiting = log.busy(t), log.waiting(t)
    waiting_direct = ((log.waiter_start[None, :] > t[:, None]).sum(1)
                      + ((log.tau[None, :] <= t[:, None]) & (log.start[None, :] > t[:, None])).sum(1)) \
        if t.size * (log.tau.size + log.q0) <= 5e7 else waiting
    nonidle = np.sum((Q > log.N) & (busy != log.N)) + np.sum((Q < log.N) & (waiting != 0))
    fcfs = int(np.sum(np.diff(log.start) < 0)) + int(np.sum(np.diff(log.waiter_start) < 0))
    if log.waiter_start.size and log.start.size:
        fcfs += int(log.start[0] < log.waiter_start[-1])
    accounting = np.sum(np.minimum(Q, log.N) != min(log.q0, log.N) + log.A_hat(t) - log.D(t))
    distinct = np.ones(log.tau.size, dtype=bool)
    if log.tau.size > 1:
        same = np.diff(log.tau) == 0
        distinct[1:] &= ~same
        distinct[:-1] &= ~same
    vw = float(np.max(np.abs(waits_before_arrival(log) - log.wait)[distinct], initial=0.0))
    return InvariantReport(
        flow=int(np.sum(in_sys != Q)),
        nonidling=int(nonidle),
        fcfs=fcfs,
        server_accounting=int(accounting),
        waiting_count=int(np.sum(np.maximum(Q - log.N, 0) != waiting_direct)),
        virtual_wait=vw,
    )


def verify_waiting_identity(log: EventLog, t: float) -> tuple[float, float, float]:
    """Both sides of the waiting-time identity at time ``t``.

    Left: ``sum_{tau_i <= t} G(t - start_i) - G(t - tau_i)``.
    Right: ``int_0^t (Q(t-s) - N)^+ dF(s) - sum_waiters G(t - start) - G(t)``,
    where the integral is a finite sum because ``(Q - N)^+`` is piecewise
    constant: a level held on ``[u_j, u_{j+1})`` carries mass
    ``F(t - u_j) - F(t - u_{j+1})``.
    """
    F = log.service_law
    G = lambda x: F.tail(np.asarray(x, dtype=float))
    m = int(log.A(t))
    lhs = float(np.sum(G(t - log.start[:m]) - G(t - log.tau[:m])))
    pts = np.concatenate([[0.0], log.tau[:m], log.start[:m], log.waiter_start])
    u = np.unique(pts[pts <= t])
    level = np.maximum(log.Q(u) - log.N, 0)
    upper = np.append(u[1:], t)
    integral = float(np.sum(level * (F.cdf(t - u) - F.cdf(t - upper))))
    rhs = integral - float(np.sum(G(t - log.waiter_start) - G(t)))
    return lhs, rhs, abs(lhs - rhs)


@dataclass(frozen=True)
class ScaledPaths:
    fluid: Path
    diffusion: Path
    diffusion_plus: Path
    virtual_wait: Path


def scale_paths(log: EventLog, grid: TimeGrid) -> ScaledPaths:
    N = log.N
    Q = log.Q(grid.t).astype(float)
    Qt = (Q - N) / math.sqrt(N)
    return ScaledPaths(
        fluid=Path(grid, Q / N),
        diffusion=Path(grid, Qt),
        diffusion_plus=Path(grid, np.maximum(Qt, 0.0)),
        virtual_wait=Path(grid, math.sqrt(N) * virtual_wait(log, grid.t)),
    )


def fluid_sup_distance(log: EventLog, target=lambda t: np.ones_like(t), upto: float | None = None) -> float:
    """``sup |Q(t)/N - target(t)|`` over every event time (Q is piecewise constant)."""
    t = log.event_times()
    if upto is not None:
        t = t[t <= upto]
    return float(np.max(np.abs(log.Q(t) / log.N - target(t))))


def initial_fluctuation(log: EventLog, grid: TimeGrid, init: Distribution) -> float:
    """``sup_t |W0(t)| / N`` with ``W0(t) = sum (1{residual > t} - F0_bar(t))``."""
    n_in = log.residual.size
    alive = n_in - np.searchsorted(np.sort(log.residual), grid.t, side="right")
    return float(np.max(np.abs(alive - n_in * init.tail(grid.t)))) / log.N


def service_martingale(log: EventLog, grid: TimeGrid) -> float:
    """``sup_t |M2(t)| / N``: centred service-completion indicators of customers placed after 0-."""
    G = log.service_law.tail
    out = 0.0
    st = np.concatenate([log.waiter_start, log.start])
    dep = np.concatenate([log.waiter_departure, log.departure])
    arr = np.concatenate([np.zeros(log.waiter_start.size), log.tau])
    for t in grid.t:
        sel = arr <= t
        out = max(out, abs(float(np.sum((dep[sel] > t) - G(t - st[sel])))))
    return out / log.N


# ---------------------------------------------------------------------------
# convergence experiment
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    Ns: list[int]
    fluid_sup: dict[int, np.ndarray]
    W0: dict[int, np.ndarray]
    M2: dict[int, np.ndarray]
    diffusion_T: dict[int, np.ndarray]
    virtual_wait_T: dict[int, np.ndarray]
    limit_T: np.ndarray
    ks: dict[int, float]

    def median_fluid(self) -> dict[int, float]:
        return {N: float(np.median(v)) for N, v in self.fluid_sup.items()}

    def rows(self):
        for N in self.Ns:
            for r in range(self.fluid_sup[N].size):
                yield (N, r, self.fluid_sup[N][r], self.W0[N][r], self.M2[N][r],
                       self.diffusion_T[N][r], self.virtual_wait_T[N][r], self.ks[N])


def _replicate(args):
    cfg, grid, fluid_values, martingales = args
    log = simulate(cfg)
    k = np.minimum(np.floor(log.event_times() / grid.step + 1e-9).astype(int), grid.n)
    t = log.event_times()
    fluid_sup = float(np.max(np.abs(log.Q(t) / cfg.N - fluid_values[k])))
    T = cfg.horizon
    w0 = initial_fluctuation(log, grid, cfg.initial_law) if martingales else float("nan")
    m2 = service_martingale(log, grid) if martingales else float("nan")
    qT = (float(log.Q(T)) - cfg.N) / math.sqrt(cfg.N)
    vT = math.sqrt(cfg.N) * float(virtual_wait(log, T))
    return fluid_sup, w0, m2, qT, vT


def convergence_experiment(beta: float, Ns, reps: int, horizon: float, step: float = 0.01,
                           service: Distribution | None = None, seed: int = 0,
                           limit_draws: int | None = None, martingales: bool = True,
                           jobs: int = 1) -> ConvergenceReport:
    """Replicate the queue at each ``N`` under Halfin-Whitt load and compare with the limits.

    Load is ``rho = 1 - beta / sqrt(N)`` with Poisson arrivals, ``Q0 = N`` and
    equilibrium residual services.  The fluid reference solves the fluid
    equation on the grid; the diffusion reference is ``limit_draws`` samples of
    the convolution-form limit at the horizon.
    """
    from .diffusion import HWScaling, assemble_driver, solve_limit_convolution
    from .fluid import FluidProblem, fluid_limit

    service = service or exponential()
    grid = TimeGrid(horizon, step)
    fluid_values = fluid_limit(FluidProblem(1.0, service), grid).Q.values
    limit_draws = reps if limit_draws is None else limit_draws
    driver = assemble_driver(service, grid, stream(seed, 2**32 - 1), limit_draws, sigma2=1.0)
    limit_T = solve_limit_convolution(driver, beta)[:, -1]

    out = {key: {} for key in ("fluid", "W0", "M2", "qT", "vT")}
    ks = {}
    for N in Ns:
        rate = HWScaling(beta, N).arrival_rate
        tasks = [(SimConfig(N, RenewalArrivals(rate), service, horizon, seed=seed,
                            replication=N * 1_000_003 + r), grid, fluid_values, martingales)
                 for r in range(reps)]
        if jobs > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(jobs) as pool:
                res = list(pool.map(_replicate, tasks, chunksize=max(1, reps // (4 * jobs))))
        else:
            res = [_replicate(t) for t in tasks]
        arr = np.asarray(res, dtype=float)
        for j, key in enumerate(out):
            out[key][N] = arr[:, j]
        ks[N] = ks_distance(out["qT"][N], limit_T)
    return ConvergenceReport(list(Ns), out["fluid"], out["W0"], out["M2"], out["qT"], out["vT"], limit_T, ks)


def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    from scipy import stats

    return float(stats.ks_2samp(a, b).statistic)
