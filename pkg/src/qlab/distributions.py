"""Probability laws on [0, inf) used as service, residual and interarrival times.

Every law exposes its CDF, tail, the integrated tail ``E[min(X, t)]``, its
atom list and a vectorised sampler.  The integrated tail is what turns a
mean-one law into its equilibrium (stationary residual-life) law.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

MEAN_TOL = 1e-6


class Distribution:
    """Base class for laws on (0, inf) with no mass at zero."""

    kind: str = "abstract"

    # -- subclasses provide these -------------------------------------------------
    def continuous_cdf(self, t):
        raise NotImplementedError

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return []

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def second_moment(self) -> float:
        raise NotImplementedError

    def scaled(self, c: float) -> "Distribution":
        """Law of ``c * X``."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    # -- generic machinery --------------------------------------------------------
    def atom_cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for p, c in self.atoms:
            out = out + c * (t >= p)
        return out

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.clip(self.continuous_cdf(t) + self.atom_cdf(t), 0.0, 1.0)

    def tail(self, t):
        return 1.0 - self.cdf(t)

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2

    def integrated_tail(self, t):
        """``int_0^t G(u) du`` by adaptive quadrature (absolute error <= 1e-9).

        Subclasses override this with a closed form where one exists.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        breaks = sorted(p for p, _ in self.atoms)
        out = np.empty_like(t)
        for i, ti in enumerate(t):
            if ti <= 0:
                out[i] = 0.0
                continue
            pts = [b for b in breaks if 0 < b < ti] or None
            val, _ = integrate.quad(
                lambda u: float(self.tail(u)), 0.0, ti,
                points=pts, epsabs=1e-10, epsrel=1e-12, limit=500,
            )
            out[i] = val
        return out

    def equilibrium_cdf(self, t):
        """F_e(t) = int_0^t G(u) du for a mean-one law."""
        require_unit_mean(self)
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0, 0.0, self.integrated_tail(np.maximum(t, 0.0)))

    def decompose(self) -> "Decomposition":
        atoms = list(self.atoms)
        return Decomposition(
            continuous_cdf=self.continuous_cdf,
            continuous_mass=1.0 - sum(c for _, c in atoms),
            atoms=atoms,
        )

    def sample(self, rng: np.random.Generator, size=None):
        return self._inverse_transform(rng, size)

    def sample_length_biased(self, rng: np.random.Generator, size=None):
        raise NotImplementedError(f"no length-biased sampler for {self.kind}")

    def _inverse_transform(self, rng, size):
        u = rng.random(size)
        lo = np.zeros_like(u, dtype=float)
        hi = np.ones_like(u, dtype=float)
        while np.any(self.cdf(hi) < u):
            hi = np.where(self.cdf(hi) < u, 2 * hi, hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return hi if size is not None else float(hi)


@dataclass(frozen=True)
class Decomposition:
    continuous_cdf: Callable
    continuous_mass: float
    atoms: list[tuple[float, float]]

    def discrete_cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for p, c in self.atoms:
            out = out + c * (t >= p)
        return out


def require_unit_mean(d: Distribution) -> None:
    if abs(d.mean - 1.0) > MEAN_TOL:
        raise ValueError(
            f"{d.kind} law has mean {d.mean:.8g}; equilibrium routines need mean 1"
        )


# ---------------------------------------------------------------------------
# concrete laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float = 1.0
    kind: str = field(default="exponential", init=False)

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    def continuous_cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, -np.expm1(-self.rate * np.maximum(t, 0.0)), 0.0)

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def second_moment(self):
        return 2.0 / self.rate**2

    def integrated_tail(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return -np.expm1(-self.rate * t) / self.rate

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def sample_length_biased(self, rng, size=None):
        return rng.gamma(2.0, 1.0 / self.rate, size)

    def scaled(self, c):
        return Exponential(self.rate / c)

    def to_config(self):
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class Erlang(Distribution):
    shape: int = 2
    rate: float = 2.0
    kind: str = field(default="erlang", init=False)

    def __post_init__(self):
        if self.shape < 1 or int(self.shape) != self.shape:
            raise ValueError("Erlang shape must be a positive integer")
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    def continuous_cdf(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return special.gammainc(self.shape, self.rate * t)

    @property
    def mean(self):
        return self.shape / self.rate

    @property
    def second_moment(self):
        return self.shape * (self.shape + 1) / self.rate**2

    def integrated_tail(self, t):
        # E[min(X, t)] = E[X; X <= t] + t P(X > t)
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        head = self.mean * special.gammainc(self.shape + 1, self.rate * t)
        return head + t * special.gammaincc(self.shape, self.rate * t)

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def sample_length_biased(self, rng, size=None):
        return rng.gamma(self.shape + 1, 1.0 / self.rate, size)

    def scaled(self, c):
        return Erlang(self.shape, self.rate / c)

    def to_config(self):
        return {"kind": "erlang", "shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class HyperExponential(Distribution):
    probs: tuple[float, ...] = (0.5, 0.5)
    rates: tuple[float, ...] = (2.0 / 3.0, 2.0)
    kind: str = field(default="hyperexponential", init=False)

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if len(self.probs) != len(self.rates):
            raise ValueError("probs and rates differ in length")
        if abs(sum(self.probs) - 1.0) > 1e-12 or min(self.probs) < 0:
            raise ValueError("probs must be a probability vector")
        if min(self.rates) <= 0:
            raise ValueError("rates must be positive")

    def continuous_cdf(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return sum(p * -np.expm1(-r * t) for p, r in zip(self.probs, self.rates))

    @property
    def mean(self):
        return sum(p / r for p, r in zip(self.probs, self.rates))

    @property
    def second_moment(self):
        return sum(2 * p / r**2 for p, r in zip(self.probs, self.rates))

    def integrated_tail(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return sum(p * -np.expm1(-r * t) / r for p, r in zip(self.probs, self.rates))

    def sample(self, rng, size=None):
        idx = rng.choice(len(self.probs), size=size, p=self.probs)
        return rng.exponential(1.0, size) / np.asarray(self.rates)[idx]

    def sample_length_biased(self, rng, size=None):
        w = np.array([p / r for p, r in zip(self.probs, self.rates)])
        idx = rng.choice(len(w), size=size, p=w / w.sum())
        return rng.gamma(2.0, 1.0, size) / np.asarray(self.rates)[idx]

    def scaled(self, c):
        return HyperExponential(self.probs, tuple(r / c for r in self.rates))

    def to_config(self):
        return {"kind": "hyperexponential", "probs": list(self.probs), "rates": list(self.rates)}


@dataclass(frozen=True)
class Discrete(Distribution):
    """Finitely many atoms; covers deterministic, lattice and empirical laws."""

    locations: tuple[float, ...]
    masses: tuple[float, ...]
    kind: str = "lattice"

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        mass = np.asarray(self.masses, dtype=float)
        if loc.shape != mass.shape or loc.size == 0:
            raise ValueError("locations and masses must be non-empty and equal length")
        if np.any(loc <= 0):
            raise ValueError("atoms must sit strictly above zero (F(0) = 0 is required)")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > 1e-12:
            raise ValueError("masses must be a probability vector")
        order = np.argsort(loc, kind="stable")
        loc, mass = loc[order], mass[order]
        # merge repeated locations
        uniq, inv = np.unique(loc, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, mass)
        object.__setattr__(self, "locations", tuple(uniq.tolist()))
        object.__setattr__(self, "masses", tuple(merged.tolist()))

    def continuous_cdf(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    @property
    def atoms(self):
        return list(zip(self.locations, self.masses))

    @property
    def mean(self):
        return float(np.dot(self.locations, self.masses))

    @property
    def second_moment(self):
        return float(np.dot(np.square(self.locations), self.masses))

    def integrated_tail(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        loc = np.asarray(self.locations)
        mass = np.asarray(self.masses)
        return np.sum(mass * np.minimum(loc, t[..., None]), axis=-1)

    def sample(self, rng, size=None):
        if len(self.locations) == 1:
            return np.full(size, self.locations[0]) if size is not None else self.locations[0]
        return rng.choice(np.asarray(self.locations), size=size, p=self.masses)

    def sample_length_biased(self, rng, size=None):
        w = np.asarray(self.locations) * np.asarray(self.masses)
        return rng.choice(np.asarray(self.locations), size=size, p=w / w.sum())

    def scaled(self, c):
        return Discrete(tuple(c * x for x in self.locations), self.masses, self.kind)

    def to_config(self):
        if self.kind == "deterministic":
            return {"kind": "deterministic", "value": self.locations[0]}
        return {"kind": self.kind, "values": list(self.locations), "probs": list(self.masses)}


@dataclass(frozen=True)
class Mixture(Distribution):
    components: tuple[Distribution, ...]
    weights: tuple[float, ...]
    kind: str = field(default="mixture", init=False)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.components) != len(self.weights):
            raise ValueError("components and weights differ in length")
        if abs(sum(self.weights) - 1.0) > 1e-12 or min(self.weights) < 0:
            raise ValueError("weights must be a probability vector")

    def continuous_cdf(self, t):
        return sum(w * c.continuous_cdf(t) for w, c in zip(self.weights, self.components))

    @property
    def atoms(self):
        merged: dict[float, float] = {}
        for w, comp in zip(self.weights, self.components):
            for p, c in comp.atoms:
                merged[p] = merged.get(p, 0.0) + w * c
        return sorted(merged.items())

    @property
    def mean(self):
        return sum(w * c.mean for w, c in zip(self.weights, self.components))

    @property
    def second_moment(self):
        return sum(w * c.second_moment for w, c in zip(self.weights, self.components))

    def integrated_tail(self, t):
        return sum(w * c.integrated_tail(t) for w, c in zip(self.weights, self.components))

    def _pick(self, rng, size, probs):
        idx = rng.choice(len(probs), size=size, p=probs)
        return np.atleast_1d(idx)

    def sample(self, rng, size=None):
        return self._mix(rng, size, np.asarray(self.weights), "sample")

    def sample_length_biased(self, rng, size=None):
        w = np.array([w * c.mean for w, c in zip(self.weights, self.components)])
        return self._mix(rng, size, w / w.sum(), "sample_length_biased")

    def _mix(self, rng, size, probs, method):
        idx = self._pick(rng, size, probs)
        out = np.empty(idx.shape)
        for i, comp in enumerate(self.components):
            sel = idx == i
            if sel.any():
                out[sel] = getattr(comp, method)(rng, int(sel.sum()))
        return out.reshape(size) if size is not None else float(out[0])

    def scaled(self, c):
        return Mixture(tuple(comp.scaled(c) for comp in self.components), self.weights)

    def to_config(self):
        return {
            "kind": "mixture",
            "components": [c.to_config() for c in self.components],
            "weights": list(self.weights),
        }


@dataclass(frozen=True)
class Equilibrium(Distribution):
    """Stationary residual-life law F_e of a mean-one ``base`` law."""

    base: Distribution
    kind: str = field(default="equilibrium", init=False)

    def __post_init__(self):
        require_unit_mean(self.base)

    def continuous_cdf(self, t):
        return self.base.equilibrium_cdf(t)

    @property
    def mean(self):
        return self.base.second_moment / 2.0

    @property
    def second_moment(self):
        raise NotImplementedError("third moment of the base law is not tracked")

    def sample(self, rng, size=None):
        # U * (length-biased draw) has density G(x) / mean
        return rng.random(size) * self.base.sample_length_biased(rng, size)

    def scaled(self, c):
        raise NotImplementedError("rescale the base law instead")

    def to_config(self):
        return {"kind": "equilibrium", "base": self.base.to_config()}


# ---------------------------------------------------------------------------
# mean-one constructors
# ---------------------------------------------------------------------------


def normalized(d: Distribution, mean: float = 1.0) -> Distribution:
    """Rescale time so that ``d`` has the requested mean."""
    return d.scaled(mean / d.mean)


def exponential() -> Exponential:
    return Exponential(1.0)


def deterministic(value: float = 1.0) -> Discrete:
    return Discrete((value,), (1.0,), kind="deterministic")


def erlang(shape: int = 2) -> Erlang:
    return Erlang(shape, float(shape))


def hyperexponential(probs: Sequence[float] = (0.5, 0.5),
                     rates: Sequence[float] = (0.5, 1.5)) -> HyperExponential:
    return normalized(HyperExponential(tuple(probs), tuple(rates)))


def lattice(values: Sequence[float], probs: Sequence[float]) -> Discrete:
    return normalized(Discrete(tuple(values), tuple(probs), kind="lattice"))


def empirical(data: Sequence[float]) -> Discrete:
    data = np.asarray(data, dtype=float)
    if data.size == 0 or np.any(data <= 0):
        raise ValueError("empirical data must be non-empty and strictly positive")
    w = np.full(data.size, 1.0 / data.size)
    return normalized(Discrete(tuple(data.tolist()), tuple(w.tolist()), kind="empirical"))


def load_empirical(path: str | FilePath) -> Discrete:
    values = [float(line) for line in FilePath(path).read_text().split() if line.strip()]
    return empirical(values)


def atom_plus_exponential(location: float, mass: float) -> Mixture:
    """``mass * delta_location + (1 - mass) * Exp``, exponential rate chosen for mean 1."""
    if not 0 <= mass < 1:
        raise ValueError("atom mass must lie in [0, 1)")
    rest = 1.0 - mass * location
    if rest <= 0:
        raise ValueError("atom alone already carries mean >= 1")
    rate = (1.0 - mass) / rest
    return Mixture((deterministic(location), Exponential(rate)), (mass, 1.0 - mass))


_SHORT = {
    "exp": exponential,
    "exponential": exponential,
    "det": deterministic,
    "det1": deterministic,
    "deterministic": deterministic,
    "hyperexp": hyperexponential,
    "hyperexponential": hyperexponential,
}


def from_config(cfg: dict | str, normalize: bool | None = None) -> Distribution:
    """Build a law from a tagged record such as ``{"kind": "erlang", "shape": 2}``.

    Strings are accepted as short names (``exp``, ``det1``, ``erlang3``,
    ``hyperexp``) or as JSON text.  Laws are normalised to mean 1 unless the
    record says ``"normalize": false``.
    """
    if isinstance(cfg, str):
        text = cfg.strip()
        if text.startswith("{"):
            cfg = json.loads(text)
        elif text.lower() in _SHORT:
            return _SHORT[text.lower()]()
        elif text.lower().startswith("erlang") and text[6:].isdigit():
            return erlang(int(text[6:]))
        else:
            raise ValueError(f"unknown distribution config {cfg!r}")
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    norm = cfg.pop("normalize", True) if normalize is None else normalize
    if kind == "exponential":
        d: Distribution = Exponential(cfg.get("rate", 1.0))
    elif kind == "deterministic":
        d = deterministic(cfg.get("value", 1.0))
    elif kind == "erlang":
        shape = int(cfg.get("shape", 2))
        d = Erlang(shape, cfg.get("rate", float(shape)))
    elif kind == "hyperexponential":
        d = HyperExponential(tuple(cfg.get("probs", (0.5, 0.5))), tuple(cfg.get("rates", (0.5, 1.5))))
    elif kind == "lattice":
        d = Discrete(tuple(cfg["values"]), tuple(cfg["probs"]), kind="lattice")
    elif kind == "empirical":
        if "values" in cfg:
            d = Discrete(tuple(cfg["values"]), tuple(cfg["probs"]), kind="empirical")
        else:
            if "path" in cfg:
                data = [float(x) for x in FilePath(cfg["path"]).read_text().split()]
            else:
                data = cfg["data"]
            d = Discrete(tuple(data), tuple([1.0 / len(data)] * len(data)), kind="empirical")
    elif kind == "mixture":
        comps = tuple(from_config(c, normalize=False) for c in cfg["components"])
        d = Mixture(comps, tuple(cfg["weights"]))
    elif kind == "equilibrium":
        return Equilibrium(from_config(cfg["base"]))
    else:
        raise ValueError(f"unknown distribution kind {kind!r}")
    return normalized(d) if norm and not math.isclose(d.mean, 1.0, abs_tol=1e-15) else d
