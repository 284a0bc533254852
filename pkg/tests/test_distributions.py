import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from qlab import distributions as D


LAWS = [
    D.exponential(),
    D.deterministic(),
    D.erlang(2),
    D.erlang(5),
    D.hyperexponential(),
    D.lattice((0.5, 1.0, 2.0), (0.2, 0.5, 0.3)),
    D.empirical([0.3, 1.1, 2.0, 0.6]),
    D.atom_plus_exponential(2.0, 0.3),
]
IDS = [f"{d.kind}-{i}" for i, d in enumerate(LAWS)]


@pytest.mark.parametrize("d", LAWS, ids=IDS)
def test_mean_one(d):
    assert d.mean == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d", LAWS, ids=IDS)
def test_cdf_axioms(d):
    t = np.linspace(0, 30, 3001)
    F = d.cdf(t)
    assert F[0] == 0.0
    assert np.all(np.diff(F) >= -1e-15)
    assert F[-1] == pytest.approx(1.0, abs=1e-6)
    assert np.array_equal(F + d.tail(t), np.ones_like(t))


@pytest.mark.parametrize("d", LAWS, ids=IDS)
def test_atom_jumps(d):
    for p, c in d.atoms:
        assert float(d.cdf(p)) - float(d.cdf(p - 1e-9)) == pytest.approx(c, abs=1e-6)


@pytest.mark.parametrize("d", LAWS, ids=IDS)
def test_integrated_tail_against_quadrature(d):
    pts = [p for p, _ in d.atoms]
    for t in (0.3, 1.0, 2.5, 7.0):
        ref, _ = integrate.quad(lambda u: float(d.tail(u)), 0, t, points=[p for p in pts if p < t] or None,
                                epsabs=1e-12, limit=200)
        assert float(d.equilibrium_cdf(t)) == pytest.approx(ref, abs=1e-9)


def test_equilibrium_examples():
    assert float(D.exponential().equilibrium_cdf(1.0)) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert float(D.deterministic().equilibrium_cdf(0.5)) == 0.5
    for d in LAWS:
        assert float(d.equilibrium_cdf(0.0)) == 0.0


def test_exponential_is_its_own_equilibrium():
    t = np.arange(0, 10, 1e-3)
    e = D.exponential()
    assert np.max(np.abs(e.equilibrium_cdf(t) - e.cdf(t))) <= 1e-9


@pytest.mark.parametrize("d", [D.exponential(), D.deterministic()], ids=["exp", "det"])
def test_equilibrium_nondecreasing_concave(d):
    t = np.linspace(0, 20, 2001)
    Fe = d.equilibrium_cdf(t)
    assert np.all(np.diff(Fe) >= 0)
    assert np.all(np.diff(Fe, 2) <= 1e-12)
    assert Fe[-1] == pytest.approx(1.0, abs=1e-8)


def test_equilibrium_rejects_wrong_mean():
    with pytest.raises(ValueError, match="mean"):
        D.Exponential(2.0).equilibrium_cdf(1.0)
    with pytest.raises(ValueError):
        D.Equilibrium(D.Exponential(0.5))


def test_decompose_examples():
    det = D.deterministic().decompose()
    assert det.atoms == [(1.0, 1.0)] and det.continuous_mass == 0.0
    assert float(det.continuous_cdf(5.0)) == 0.0
    exp = D.exponential().decompose()
    assert exp.atoms == [] and exp.continuous_mass == 1.0
    mix = D.atom_plus_exponential(2.0, 0.3)
    parts = mix.decompose()
    assert parts.atoms == [(2.0, 0.3)]
    assert parts.continuous_mass == pytest.approx(0.7)
    t = np.linspace(0, 10, 101)
    assert np.allclose(parts.continuous_cdf(t) + parts.discrete_cdf(t), mix.cdf(t))


def test_sampling_examples():
    rng = np.random.default_rng(1)
    assert np.all(D.deterministic().sample(rng, 10) == 1.0)
    assert D.deterministic().sample(rng) == 1.0
    assert abs(D.exponential().sample(rng, 100_000).mean() - 1) <= 0.02
    h = D.hyperexponential()
    assert h.rates == pytest.approx((2 / 3, 2.0))
    ks = stats.kstest(h.sample(rng, 100_000), lambda x: h.cdf(x)).statistic
    assert ks <= 0.01


@pytest.mark.parametrize("d", LAWS, ids=IDS)
def test_equilibrium_sampler_matches_cdf(d):
    rng = np.random.default_rng(2)
    e = D.Equilibrium(d)
    x = e.sample(rng, 20_000)
    assert stats.kstest(x, lambda s: e.cdf(s)).statistic <= 3 / math.sqrt(20_000) * 1.36 / 1.0


def test_generic_inverse_transform():
    rng = np.random.default_rng(3)
    e = D.Equilibrium(D.erlang(3))
    x = D.Distribution._inverse_transform(e, rng, 20_000)
    assert stats.kstest(x, lambda s: e.cdf(s)).statistic <= 0.015


def test_atoms_must_be_positive():
    with pytest.raises(ValueError):
        D.Discrete((0.0, 1.0), (0.5, 0.5))


def test_config_round_trip(tmp_path):
    for d in LAWS:
        again = D.from_config(d.to_config())
        t = np.linspace(0, 6, 61)
        assert np.allclose(again.cdf(t), d.cdf(t))
    assert D.from_config("det1") == D.deterministic()
    assert D.from_config("erlang3") == D.erlang(3)
    assert D.from_config('{"kind": "erlang", "shape": 2}') == D.erlang(2)
    assert D.from_config({"kind": "exponential", "rate": 4.0}).mean == pytest.approx(1.0)
    assert D.from_config({"kind": "exponential", "rate": 4.0, "normalize": False}).mean == 0.25
    f = tmp_path / "data.txt"
    f.write_text("1\n2\n3\n")
    emp = D.from_config({"kind": "empirical", "path": str(f)})
    assert emp.mean == pytest.approx(1.0) and len(emp.atoms) == 3
    assert D.load_empirical(f).atoms == emp.atoms
    with pytest.raises(ValueError):
        D.from_config("weibull")


@given(st.floats(0.05, 5), st.floats(0.05, 0.95))
def test_mixture_mean_and_atoms(location, mass):
    if mass * location >= 1:
        with pytest.raises(ValueError):
            D.atom_plus_exponential(location, mass)
        return
    m = D.atom_plus_exponential(location, mass)
    assert m.mean == pytest.approx(1.0)
    assert m.atoms == [(location, pytest.approx(mass))]


@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=20))
def test_empirical_normalised(data):
    d = D.empirical(data)
    assert d.mean == pytest.approx(1.0)
    assert sum(c for _, c in d.atoms) == pytest.approx(1.0)
