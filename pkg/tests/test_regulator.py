import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qlab import distributions as D
from qlab.acceptance import random_law, random_path
from qlab.quadrature import Path, TimeGrid, distance
from qlab.regulator import (
    ConvergenceError, RegulatorProblem, contraction_window, picard_iterates, regulate, solve_forward,
    solve_picard, solve_pointmass, window_mass,
)

G5 = TimeGrid(5.0, 0.01)


def sawtooth_input(g):
    return Path.from_function(g, lambda t: (t < 1) + np.minimum(t, 1))


def sawtooth(g):
    return 1 + g.t - np.floor(g.t + 1e-9)


def test_zero_is_fixed_point():
    for d in (D.exponential(), D.deterministic(), D.erlang(3)):
        rep = solve_forward(RegulatorProblem(Path.constant(G5, 0.0), d, 0.0))
        assert rep.solution.sup() == 0 and rep.iterations == 1


def test_constant_one_below_threshold():
    z = regulate(Path.constant(G5, 1.0), D.deterministic(), -1.0)
    assert np.all(z.values == 1.0)


def test_sawtooth_all_methods():
    x = sawtooth_input(G5)
    p = RegulatorProblem(x, D.deterministic(), -1.0)
    exact = sawtooth(G5)
    assert np.max(np.abs(solve_forward(p).solution.values - exact)) <= 1e-12
    assert np.max(np.abs(solve_pointmass(x, 1.0, -1.0).values - exact)) <= 1e-12
    rep = solve_picard(p)
    assert np.max(np.abs(rep.solution.values - exact)) <= 1e-9


def test_pointmass_unrolled_ramp():
    g = TimeGrid(3.0, 0.01)
    z = solve_pointmass(Path.identity(g), 1.0, 0.0).values
    t = g.t
    expect = np.where(t < 1, t, np.where(t < 2, 2 * t - 1, 3 * t - 3))
    assert np.allclose(z[:-1], expect[:-1])


def test_pointmass_zero_input():
    g = TimeGrid(3.0, 0.01)
    for c in (0.3, 1.0, 2.2):
        for a in (0.0, -1.0, -0.5):
            assert solve_pointmass(Path.constant(g, 0.0), c, a).sup() == 0


def test_pointmass_errors():
    with pytest.raises(ValueError):
        solve_pointmass(Path.constant(G5, 0.0), 0.0)
    with pytest.raises(ValueError):
        solve_pointmass(Path.constant(G5, 0.0), -1.0)


def test_atom_at_zero_rejected():
    with pytest.raises(ValueError):
        regulate(Path.constant(TimeGrid(1.0, 0.1), 0.0), D.Discrete((0.01, 1.5), (0.5, 0.5), kind="lattice"))


def test_picard_zero_one_iteration():
    rep = solve_picard(RegulatorProblem(Path.constant(G5, 0.0), D.exponential()))
    assert rep.iterations == 1 and rep.solution.sup() == 0


def test_picard_equilibrium_geometric_decay():
    p = RegulatorProblem(Path.constant(G5, 1.0), D.exponential(), -1.0)
    rep = solve_picard(p, tol=1e-8)
    assert np.max(np.abs(rep.solution.values - 1)) <= 1e-8
    h = np.asarray(rep.history)
    assert rep.residual <= 1e-8
    assert np.all(np.diff(h[h > 0]) <= 0)


def test_picard_raises_on_budget():
    p = RegulatorProblem(random_path(np.random.default_rng(0), G5), D.exponential(), 0.0)
    with pytest.raises(ConvergenceError) as err:
        solve_picard(p, tol=1e-12, max_iter=3)
    assert err.value.report.iterations == 3 and err.value.report.residual > 1e-12


def test_contraction_window():
    g = TimeGrid(5.0, 0.01)
    delta = contraction_window(D.exponential(), g)
    assert delta == pytest.approx(math.log(2), abs=g.step)
    assert window_mass(D.exponential(), g, delta) <= 0.5
    assert contraction_window(D.deterministic(), g) == 1.0


@given(st.integers(0, 10_000))
def test_method_agreement_and_uniqueness(seed):
    rng = np.random.default_rng(seed)
    g = TimeGrid(3.0, 0.02)
    x, F, a = random_path(rng, g), random_law(rng), float(rng.choice([0.0, -1.0]))
    p = RegulatorProblem(x, F, a)
    z = solve_forward(p).solution
    assert distance(solve_picard(p).solution, z) <= max(1e-9, 10 * g.step)
    assert distance(solve_picard(p).solution, solve_picard(p, initial=x).solution) <= 2e-9


@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 1.3]))
def test_pointmass_matches_forward(seed, c):
    rng = np.random.default_rng(seed)
    x = random_path(rng, G5)
    a = float(rng.choice([0.0, -1.0]))
    assert distance(solve_pointmass(x, c, a), regulate(x, D.deterministic(c), a)) <= 1e-12


@given(st.integers(0, 10_000))
def test_monotone_in_input(seed):
    rng = np.random.default_rng(seed)
    x1 = random_path(rng, G5)
    x2 = x1 + np.abs(random_path(rng, G5).values)
    F, a = random_law(rng), float(rng.choice([0.0, -1.0]))
    assert np.all(regulate(x1, F, a).values <= regulate(x2, F, a).values + 1e-12)


@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 1.3]))
def test_pointmass_lipschitz(seed, c):
    rng = np.random.default_rng(seed)
    x1, x2 = random_path(rng, G5), random_path(rng, G5)
    a = float(rng.choice([0.0, -1.0]))
    dz = np.maximum.accumulate(np.abs(solve_pointmass(x1, c, a).values - solve_pointmass(x2, c, a).values))
    dx = np.maximum.accumulate(np.abs(x1.values - x2.values))
    k = np.floor(G5.t / c + 1e-9) + 1
    assert np.all(dz <= k * dx + 1e-12)


@given(st.integers(0, 10_000), st.floats(0.2, 0.6))
def test_nondegenerate_lipschitz(seed, eps_target):
    rng = np.random.default_rng(seed)
    F = rng.choice([D.exponential(), D.erlang(2), D.hyperexponential()])
    delta = contraction_window(F, G5, eps_target)
    eps = window_mass(F, G5, delta) + 1e-12
    x1, x2 = random_path(rng, G5), random_path(rng, G5)
    dz = np.abs(regulate(x1, F, 0.0).values - regulate(x2, F, 0.0).values)
    dx = np.abs(x1.values - x2.values)
    w = int(round(delta / G5.step))
    for k in range(1, G5.n // w + 2):
        m = min(k * w, G5.n) + 1
        assert dz[:m].max() <= (1 - eps) ** (-k) * dx[:m].max() + 1e-12


def test_geometric_envelope_exponential():
    g = TimeGrid(4.0, 0.01)
    rng = np.random.default_rng(5)
    x = random_path(rng, g)
    F = D.exponential()
    delta = contraction_window(F, g)
    eps = window_mass(F, g, delta) + 1e-12
    w = int(round(delta / g.step))
    k_max = math.ceil(g.horizon / delta)
    prev = np.zeros(g.size)
    it = picard_iterates(RegulatorProblem(x, F, 0.0))
    for n in range(0, 30):
        u = next(it)
        if n >= 1:
            diff = np.abs(u - prev)
            for j in range(1, k_max + 1):
                m = min(j * w, g.n) + 1
                assert diff[:m].max() <= j**j * n**j * eps**n * x.sup() + 1e-15
        prev = u
