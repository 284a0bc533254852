import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qlab import distributions as D
from qlab.quadrature import TimeGrid
from qlab.simulator import (
    FixedArrivals, RenewalArrivals, SimConfig, SuperpositionArrivals, arrivals_from_config,
    check_invariants, convergence_experiment, fluid_sup_distance, scale_paths, simulate,
    verify_waiting_identity, virtual_wait, virtual_wait_by_departures, waits_before_arrival,
)

DET = D.deterministic()


def fixed(N, times, service=DET, q0=0, horizon=10.0, **kw):
    return simulate(SimConfig(N, FixedArrivals(tuple(times)), service, horizon, q0=q0, **kw))


# -- hand traces -----------------------------------------------------------------

def test_empty_system():
    log = fixed(3, [], q0=0)
    t = np.linspace(0, 10, 11)
    assert np.all(log.Q(t) == 0)
    assert log.departures().size == 0 and log.tau.size == 0
    assert np.all(virtual_wait(log, t) == 0)
    assert verify_waiting_identity(log, 5.0) == (0.0, 0.0, 0.0)


def test_single_server_trace():
    log = fixed(1, [1, 2, 3], D.deterministic(0.5))
    assert log.departures().tolist() == [1.5, 2.5, 3.5]
    t = np.array([0.5, 1.0, 1.2, 1.5, 2.2, 2.7, 3.0, 3.5])
    assert log.Q(t).tolist() == [0, 1, 1, 0, 1, 0, 1, 0]
    assert virtual_wait(log, 0.9) == 0.0
    assert np.all(log.wait == 0)


def test_two_server_trace():
    # the third customer takes the server freed at 1.1, having arrived at 0.3
    log = fixed(2, [0.1, 0.2, 0.3])
    assert log.start.tolist() == pytest.approx([0.1, 0.2, 1.1])
    assert log.wait[2] == pytest.approx(0.8)
    assert log.departures()[0] == pytest.approx(1.1)


def test_wait_behind_initial_customer():
    cfg = SimConfig(1, FixedArrivals(()), DET, 5.0, q0=1, init=D.deterministic(2.0))
    log = simulate(cfg)
    assert log.residual.tolist() == [2.0]
    assert virtual_wait(log, 0.0) == 2.0
    assert virtual_wait(log, 2.5) == 0.0


def test_initial_waiters_go_first():
    cfg = SimConfig(1, FixedArrivals((0.5,)), DET, 10.0, q0=3, init=D.deterministic(1.0))
    log = simulate(cfg)
    assert log.waiter_start.tolist() == [1.0, 2.0]
    assert log.start.tolist() == [3.0]
    assert log.Q(0.0) == 3 and log.Q(0.5) == 4 and log.Q(3.5) == 1


def test_event_table_order():
    log = fixed(1, [1.0, 1.5], D.deterministic(0.5))
    t, rank, cust, Q, A, Ah, D_ = log.events()
    # at 1.5 the departure of customer 0 precedes the arrival and start of customer 1
    at = t == 1.5
    assert rank[at].tolist() == [0, 1, 2]
    assert Q[-1] == 0 and A[-1] == 2 and D_[-1] == 2 and Ah[-1] == 2


# -- random runs ------------------------------------------------------------------

service_laws = st.sampled_from([D.exponential(), DET, D.erlang(2), D.hyperexponential(),
                                D.lattice((0.5, 1.5), (0.5, 0.5))])


@given(st.integers(1, 6), st.floats(0.2, 3.0), service_laws, st.integers(0, 10), st.integers(0, 10**6))
def test_log_invariants(N, load, service, q0, seed):
    cfg = SimConfig(N, RenewalArrivals(load * N), service, 6.0, q0=q0, seed=seed)
    log = simulate(cfg)
    rep = check_invariants(log)
    assert rep.ok, rep
    assert np.all(log.wait >= 0)
    assert np.all(np.diff(log.start) >= 0)


@given(st.integers(1, 4), st.integers(0, 6), st.integers(0, 10**6))
def test_virtual_wait_two_ways(N, q0, seed):
    log = simulate(SimConfig(N, RenewalArrivals(1.2 * N), D.exponential(), 5.0, q0=q0, seed=seed))
    for t in np.linspace(0, 5, 23):
        assert virtual_wait(log, t) == pytest.approx(virtual_wait_by_departures(log, t), abs=1e-12)


def test_virtual_wait_is_wait_of_arrivals():
    log = simulate(SimConfig(3, RenewalArrivals(3.5), D.erlang(2), 20.0, seed=4))
    assert np.allclose(waits_before_arrival(log), log.wait, atol=1e-12)


def test_determinism():
    cfg = SimConfig(5, SuperpositionArrivals(5.0, 3), D.hyperexponential(), 8.0, seed=9, replication=2)
    a, b = simulate(cfg), simulate(cfg)
    for name in ("residual", "tau", "start", "service", "next_free"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = simulate(SimConfig(5, SuperpositionArrivals(5.0, 3), D.hyperexponential(), 8.0, seed=9, replication=3))
    assert not np.array_equal(a.tau, c.tau)


def test_superposition_rate():
    arr = SuperpositionArrivals(4.0, 5, D.erlang(3))
    times = arr.generate(np.random.default_rng(0), 2000.0)
    assert np.all(np.diff(times) >= 0)
    assert times.size / 2000.0 == pytest.approx(4.0, rel=0.03)


def test_arrival_config_round_trip():
    for arr in (RenewalArrivals(2.0, D.erlang(2)), SuperpositionArrivals(3.0, 4), FixedArrivals((0.5, 1.0))):
        assert arrivals_from_config(arr.to_config()) == arr
    with pytest.raises(ValueError):
        arrivals_from_config({"kind": "poisson-ish"})


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(0, FixedArrivals(()))
    with pytest.raises(ValueError):
        SimConfig(1, FixedArrivals(()), q0=-1)
    with pytest.raises(ValueError):
        fixed(1, [-1.0])


# -- waiting-time identity --------------------------------------------------------------

@pytest.mark.parametrize("service,tol", [(DET, 1e-9), (D.exponential(), 1e-6), (D.erlang(2), 1e-6)],
                         ids=["deterministic", "exponential", "erlang"])
def test_waiting_time_identity(service, tol):
    for r in range(10):
        log = simulate(SimConfig(10, RenewalArrivals(10.0), service, 5.0, seed=3, replication=r))
        for t in (1.0, 2.5, 5.0):
            assert verify_waiting_identity(log, t)[2] <= tol


def test_waiting_time_identity_with_initial_waiters():
    log = simulate(SimConfig(4, RenewalArrivals(5.0), D.exponential(), 5.0, q0=9, seed=1))
    assert verify_waiting_identity(log, 4.0)[2] <= 1e-9


# -- scaling ------------------------------------------------------------------------------

def test_scale_paths_single_server():
    g = TimeGrid(4.0, 0.25)
    log = fixed(1, [1, 2, 3], D.deterministic(0.5))
    sp = scale_paths(log, g)
    Q = log.Q(g.t)
    assert np.array_equal(sp.fluid.values, Q)
    assert np.array_equal(sp.diffusion.values, Q - 1)
    assert np.array_equal(sp.diffusion_plus.values, np.maximum(Q - 1, 0))


def test_scale_paths_full_system():
    g = TimeGrid(1.0, 0.25)
    N = 16
    log = simulate(SimConfig(N, FixedArrivals((0.5,) * 4), DET, 1.0, init=D.deterministic(5.0)))
    sp = scale_paths(log, g)
    assert np.all(sp.fluid.values[:2] == 1) and np.all(sp.diffusion.values[:2] == 0)
    assert sp.diffusion.values[-1] == pytest.approx(4 / math.sqrt(N))
    assert sp.virtual_wait.values[-1] == pytest.approx(math.sqrt(N) * 4.0)
    assert fluid_sup_distance(log) == pytest.approx(4 / N)


def test_convergence_experiment_smoke():
    rep = convergence_experiment(1.0, [9, 36], reps=6, horizon=2.0, step=0.05, seed=5, limit_draws=50)
    assert set(rep.median_fluid()) == {9, 36}
    rows = list(rep.rows())
    assert len(rows) == 12 and all(len(r) == 8 for r in rows)
    assert rep.limit_T.shape == (50,)
    again = convergence_experiment(1.0, [9, 36], reps=6, horizon=2.0, step=0.05, seed=5, limit_draws=50)
    assert np.array_equal(again.fluid_sup[36], rep.fluid_sup[36])
