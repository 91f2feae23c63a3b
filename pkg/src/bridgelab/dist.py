"""Signal-coordinate distributions.

Every variant describes the law of a single coordinate of beta.  The risk
integrals only see |B| (the proximal map is odd and Z is symmetric), so the
magnitude variants are sampled with independent fair random signs and their
quadrature rules live on [0, inf).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import integrate, special

from .errors import InvalidArgument

EXP_TAIL_MASS = 1e-14
DEFAULT_B_NODES = 200


@dataclass(frozen=True, eq=False)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str  # "gauss-hermite-normal" | "gauss-legendre-interval" | "discrete-exact"

    def apply(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@functools.lru_cache(maxsize=32)
def gauss_hermite_normal(n: int) -> Quadrature:
    """n-point rule for E f(Z), Z ~ N(0, 1)."""
    x, w = np.polynomial.hermite.hermgauss(n)
    return Quadrature(math.sqrt(2.0) * x, w / math.sqrt(math.pi), "gauss-hermite-normal")


@functools.lru_cache(maxsize=32)
def gauss_legendre_unit(n: int):
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _check_r(r):
    if r is None or math.isnan(r):
        raise InvalidArgument("moment order r must be a real number")


class SignalDistribution:
    """Base class; see the concrete variants below."""

    kind: str = ""
    magnitude_only: bool = True

    def moment(self, r: float) -> float:
        raise NotImplementedError

    def cdf(self, t: float) -> float:
        """P(|B| <= t)."""
        raise NotImplementedError

    def cdf_zero_exponent(self) -> Optional[float]:
        """Exponent l with P(|B| <= t) = Theta(t^l) near 0, or None if the
        mass is bounded away from zero."""
        return None

    def _magnitudes(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def sample(self, count: int, seed: int) -> np.ndarray:
        if count < 1:
            raise InvalidArgument("count must be >= 1")
        rng = np.random.default_rng(seed)
        mags = self._magnitudes(rng, count)
        if not self.magnitude_only:
            return mags
        signs = 2.0 * rng.integers(0, 2, size=count) - 1.0
        return signs * mags

    def expectation_rule(self, node_budget: int = DEFAULT_B_NODES) -> Quadrature:
        return _cached_rule(self, node_budget)

    def _build_rule(self, node_budget: int) -> Quadrature:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    # value semantics for caching; dataclass eq is disabled so that numpy
    # payloads never end up in comparisons
    def _key(self):
        return (self.kind,) + tuple(
            getattr(self, f) for f in self.__dataclass_fields__  # type: ignore[attr-defined]
        )

    def __eq__(self, other):
        return isinstance(other, SignalDistribution) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


@functools.lru_cache(maxsize=64)
def _cached_rule(dist: SignalDistribution, node_budget: int) -> Quadrature:
    if node_budget < 8:
        raise InvalidArgument("node_budget must be >= 8")
    return dist._build_rule(node_budget)


@dataclass(frozen=True, eq=False)
class PointMassSet(SignalDistribution):
    atoms: tuple  # ((value, prob), ...)

    kind = "point_mass"
    magnitude_only = False

    def __post_init__(self):
        atoms = tuple((float(v), float(p)) for v, p in self.atoms)
        if not atoms:
            raise InvalidArgument("point_mass needs at least one atom")
        for v, p in atoms:
            if v == 0.0 or not math.isfinite(v):
                raise InvalidArgument(f"atom value {v} must be finite and nonzero")
            if not (0.0 < p <= 1.0):
                raise InvalidArgument(f"atom probability {p} must lie in (0, 1]")
        if abs(sum(p for _, p in atoms) - 1.0) > 1e-12:
            raise InvalidArgument("atom probabilities must sum to 1")
        object.__setattr__(self, "atoms", atoms)

    def moment(self, r):
        _check_r(r)
        return math.fsum(p * abs(v) ** r for v, p in self.atoms)

    def cdf(self, t):
        return math.fsum(p for v, p in self.atoms if abs(v) <= t)

    def _magnitudes(self, rng, count):
        values = np.array([v for v, _ in self.atoms])
        probs = np.array([p for _, p in self.atoms])
        return rng.choice(values, size=count, p=probs / probs.sum())

    def _build_rule(self, node_budget):
        nodes = np.array([abs(v) for v, _ in self.atoms])
        weights = np.array([p for _, p in self.atoms])
        return Quadrature(nodes, weights, "discrete-exact")

    def to_config(self):
        return {"kind": self.kind, "atoms": [[v, p] for v, p in self.atoms]}


@dataclass(frozen=True, eq=False)
class TwoPointMagnitude(SignalDistribution):
    """|B| ~ alpha * delta_{mu1} + (1 - alpha) * delta_{mu2}."""

    mu1: float
    mu2: float
    alpha: float

    kind = "two_point"

    def __post_init__(self):
        if not (self.mu1 > 0 and self.mu2 >= self.mu1 and math.isfinite(self.mu2)):
            raise InvalidArgument("two_point needs 0 < mu1 <= mu2 < inf")
        if not (0.0 < self.alpha < 1.0):
            raise InvalidArgument("two_point alpha must lie in (0, 1)")

    def moment(self, r):
        _check_r(r)
        return self.alpha * self.mu1**r + (1.0 - self.alpha) * self.mu2**r

    def cdf(self, t):
        return (self.alpha if t >= self.mu1 else 0.0) + ((1.0 - self.alpha) if t >= self.mu2 else 0.0)

    def _magnitudes(self, rng, count):
        return np.where(rng.random(count) < self.alpha, self.mu1, self.mu2)

    def _build_rule(self, node_budget):
        return Quadrature(
            np.array([self.mu1, self.mu2]),
            np.array([self.alpha, 1.0 - self.alpha]),
            "discrete-exact",
        )

    def to_config(self):
        return {"kind": self.kind, "mu1": self.mu1, "mu2": self.mu2, "alpha": self.alpha}


@dataclass(frozen=True, eq=False)
class UniformMagnitude(SignalDistribution):
    theta: float

    kind = "uniform"

    def __post_init__(self):
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise InvalidArgument("uniform theta must be positive")

    def moment(self, r):
        _check_r(r)
        if r <= -1.0:
            return math.inf
        return self.theta**r / (r + 1.0)

    def cdf(self, t):
        return min(max(t / self.theta, 0.0), 1.0)

    def cdf_zero_exponent(self):
        return 1.0

    def _magnitudes(self, rng, count):
        return self.theta * rng.random(count)

    def _build_rule(self, node_budget):
        u, w = gauss_legendre_unit(node_budget)
        return Quadrature(self.theta * u, w.copy(), "gauss-legendre-interval")

    def to_config(self):
        return {"kind": self.kind, "theta": self.theta}


@dataclass(frozen=True, eq=False)
class ExpTailMagnitude(SignalDistribution):
    """Density zeta(tau, q0) * exp(-tau * b**q0) on [0, inf)."""

    tau: float
    q0: float

    kind = "exp_tail"

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InvalidArgument("exp_tail tau must be positive")
        if not (0.0 < self.q0 <= 2.0):
            raise InvalidArgument("exp_tail q0 must lie in (0, 2]")

    @property
    def scale(self):
        return self.tau ** (-1.0 / self.q0)

    def _raw_integral(self, r):
        # int_0^inf b^r exp(-tau b^q0) db.  In t = tau b^q0 this becomes
        # tau^(-(r+1)/q0) / q0 * int_0^inf t^(a-1) e^-t dt with a = (r+1)/q0;
        # QAWS absorbs the t^(a-1) endpoint singularity, the split sits past the peak
        a = (r + 1.0) / self.q0
        c = max(1.0, a - 1.0)
        head, _ = integrate.quad(
            lambda t: np.exp(-t), 0.0, c, weight="alg", wvar=(a - 1.0, 0.0), epsabs=0.0, epsrel=1e-12, limit=200
        )
        tail, _ = integrate.quad(
            lambda t: np.exp((a - 1.0) * np.log(t) - t), c, np.inf, epsabs=0.0, epsrel=1e-12, limit=200
        )
        return (head + tail) * self.tau ** (-a) / self.q0

    @cached_property
    def zeta(self) -> float:
        return 1.0 / self._raw_integral(0.0)

    def moment(self, r):
        _check_r(r)
        if r <= -1.0:
            return math.inf
        if r == 0.0:
            return 1.0
        return self.zeta * self._raw_integral(r)

    def cdf(self, t):
        if t <= 0:
            return 0.0
        return float(special.gammainc(1.0 / self.q0, self.tau * t**self.q0))

    def cdf_zero_exponent(self):
        # density is positive and finite at 0
        return 1.0

    def truncation_point(self) -> float:
        t = special.gammainccinv(1.0 / self.q0, EXP_TAIL_MASS)
        return (t / self.tau) ** (1.0 / self.q0)

    def _magnitudes(self, rng, count):
        t = rng.gamma(1.0 / self.q0, 1.0, size=count)
        return (t / self.tau) ** (1.0 / self.q0)

    def _build_rule(self, node_budget):
        u, w = gauss_legendre_unit(node_budget)
        bmax = self.truncation_point()
        # b = bmax * u^k clusters nodes at 0 where exp(-tau b^q0) is not
        # smooth; k = 2 max(1, 1/q0) also makes b^(-1/2) times the Jacobian
        # analytic, which matters for the E|B|^(q-2) type integrands
        k = 2.0 * max(1.0, 1.0 / self.q0)
        b = bmax * u**k
        jac = bmax * k * u ** (k - 1.0)
        dens = self.zeta * np.exp(-self.tau * b**self.q0)
        return Quadrature(b, w * jac * dens, "gauss-legendre-interval")

    def to_config(self):
        return {"kind": self.kind, "tau": self.tau, "q0": self.q0}


@dataclass(frozen=True, eq=False)
class PowerZeroMagnitude(SignalDistribution):
    """Density (ell / cap^ell) * b^(ell - 1) on (0, cap]."""

    ell: float
    cap: float = 1.0

    kind = "power_zero"

    def __post_init__(self):
        if not (self.ell > 0 and math.isfinite(self.ell)):
            raise InvalidArgument("power_zero ell must be positive")
        if not (self.cap > 0 and math.isfinite(self.cap)):
            raise InvalidArgument("power_zero cap must be positive")

    def moment(self, r):
        _check_r(r)
        if r <= -self.ell:
            return math.inf
        return self.ell * self.cap**r / (self.ell + r)

    def cdf(self, t):
        if t <= 0:
            return 0.0
        if t >= self.cap:
            return 1.0
        return (t / self.cap) ** self.ell

    def cdf_zero_exponent(self):
        return self.ell

    def _magnitudes(self, rng, count):
        return self.cap * rng.random(count) ** (1.0 / self.ell)

    def _build_rule(self, node_budget):
        # b = cap * u^(1/ell) with u uniform removes the density singularity
        u, w = gauss_legendre_unit(node_budget)
        return Quadrature(self.cap * u ** (1.0 / self.ell), w.copy(), "gauss-legendre-interval")

    def to_config(self):
        return {"kind": self.kind, "ell": self.ell, "cap": self.cap}


_KINDS = {
    "point_mass": PointMassSet,
    "two_point": TwoPointMagnitude,
    "uniform": UniformMagnitude,
    "exp_tail": ExpTailMagnitude,
    "power_zero": PowerZeroMagnitude,
}


def from_config(cfg: dict) -> SignalDistribution:
    """Build a distribution from its JSON fragment, e.g.
    ``{"kind": "uniform", "theta": 1.0}``."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise InvalidArgument("dist: expected an object with a 'kind' field")
    kind = cfg["kind"]
    if kind not in _KINDS:
        raise InvalidArgument(f"dist.kind: unknown kind {kind!r}; expected one of {sorted(_KINDS)}")
    fields = {k: v for k, v in cfg.items() if k != "kind"}
    if kind == "point_mass":
        atoms = fields.pop("atoms", None)
        if atoms is None:
            raise InvalidArgument("dist.atoms: required for point_mass")
        fields["atoms"] = tuple(tuple(a) for a in atoms)
    try:
        return _KINDS[kind](**fields)
    except TypeError as exc:
        raise InvalidArgument(f"dist: {exc}") from None


# module-level spellings of the methods
def moment(dist: SignalDistribution, r: float) -> float:
    return dist.moment(r)


def cdf_zero_exponent(dist: SignalDistribution) -> Optional[float]:
    return dist.cdf_zero_exponent()


def sample(dist: SignalDistribution, count: int, seed: int) -> np.ndarray:
    return dist.sample(count, seed)


def expectation_rule(dist: SignalDistribution, node_budget: int = DEFAULT_B_NODES) -> Quadrature:
    return dist.expectation_rule(node_budget)
