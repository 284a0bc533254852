import numpy as np
import pytest
from hypothesis import given, strategies as st

from qlab import distributions as D
from qlab.fluid import FluidProblem, adjustment_term, equilibrium_check, fluid_limit
from qlab.quadrature import Path, TimeGrid

G5 = TimeGrid(5.0, 0.01)


def test_sawtooth():
    sol = fluid_limit(FluidProblem(1.0, D.deterministic(), D.deterministic()), G5)
    t = G5.t
    assert np.max(np.abs(sol.Q.values - (1 + t - np.floor(t + 1e-9)))) <= 1e-12


def test_sawtooth_periodic_with_unit_drops():
    Q = fluid_limit(FluidProblem(1.0, D.deterministic(), D.deterministic()), G5).Q.values
    assert np.allclose(Q[100:], Q[:-100])
    jumps = np.diff(Q)
    drops = np.flatnonzero(jumps < 0)
    assert np.array_equal(drops + 1, np.arange(100, 501, 100))
    assert np.allclose(jumps[drops], -1 + G5.step)


@pytest.mark.parametrize("F", [D.exponential(), D.erlang(2), D.deterministic(), D.hyperexponential()],
                         ids=lambda d: d.kind)
def test_equilibrium_stays_at_one(F):
    assert equilibrium_check(F, TimeGrid(10.0, 1e-3)) <= 1e-6


def test_explicit_equilibrium_init_matches_default():
    F = D.erlang(2)
    a = fluid_limit(FluidProblem(1.0, F), G5).Q.values
    b = fluid_limit(FluidProblem(1.0, F, D.Equilibrium(F)), G5).Q.values
    assert np.array_equal(a, b)


class ClosedFormResidual:
    """Residual law given by the exact equilibrium tail, bypassing the grid form."""

    def __init__(self, base):
        self.base = base

    def tail(self, t):
        return 1.0 - self.base.equilibrium_cdf(t)


def test_closed_form_equilibrium_is_first_order():
    F = D.erlang(2)
    errs = []
    for h in (0.02, 0.01):
        sol = fluid_limit(FluidProblem(1.0, F, ClosedFormResidual(F)), TimeGrid(5.0, h))
        errs.append(np.max(np.abs(sol.Q.values - 1)))
    assert 0 < errs[0] <= 10 * 0.02
    assert 1.6 <= errs[0] / errs[1] <= 2.4


def test_empty_start_exponential():
    sol = fluid_limit(FluidProblem(0.0, D.exponential()), G5)
    assert np.max(np.abs(sol.Q.values - (1 - np.exp(-G5.t)))) <= 10 * G5.step
    assert np.all(sol.Q.values <= 1)
    assert sol.adjustment.sup() == 0


@given(st.floats(0, 3), st.sampled_from([D.exponential(), D.erlang(2), D.deterministic(), D.hyperexponential()]),
       st.floats(0, 2))
def test_decomposition_and_bounds(q0, F, slope):
    g = TimeGrid(4.0, 0.02)
    arrivals = Path.from_function(g, lambda t: slope * t)
    sol = fluid_limit(FluidProblem(q0, F, D.exponential(), arrivals), g)
    total = sum((p.values for p in sol.terms()), np.zeros(g.size))
    assert np.array_equal(total, sol.Q.values) or np.allclose(total, sol.Q.values, atol=1e-13)
    assert np.allclose(sol.adjustment.values, adjustment_term(sol.Q, F).values, atol=1e-12)
    assert np.all(sol.adjustment.values >= -1e-15)
    assert np.all(sol.Q.values >= -1e-12)
    assert np.all(sol.Q.values <= min(q0, 1) + max(q0 - 1, 0) + arrivals.values + 1e-12)


def test_validation():
    with pytest.raises(ValueError):
        FluidProblem(-1.0, D.exponential())
    with pytest.raises(ValueError):
        FluidProblem(1.0, D.exponential(), arrivals=Path.from_function(G5, lambda t: -t))
