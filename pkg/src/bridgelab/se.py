"""State-evolution fixed point for optimally tuned bridge regression.

With s = sigma_bar^2 and the optimally tuned scalar risk R*(sigma), the
noise level of the equivalent scalar channel solves

    h(s) = s - sigma_eff^2 - s * R*(sqrt(s)) / delta = 0,

and the asymptotic MSE is s * R*(sqrt(s)) = delta * (s - sigma_eff^2).
sigma_eff is sigma_w for y = X beta + w and sigma_w / sqrt(delta) for the
scaled model y = X beta + w / sqrt(delta).

Since 0 <= R* <= 1, for delta > 1 the root lies in
[sigma_eff^2, sigma_eff^2 / (1 - 1/delta)] and h changes sign across it,
so plain bisection always converges.  For delta <= 1 the upper end is found
by doubling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .dist import SignalDistribution
from .errors import InvalidArgument, NonConvergence
from .risk import QuadratureConfig, RiskPoint, SearchConfig, optimal_chi, refine_chi, risk


@dataclass(frozen=True)
class SEConfig:
    fp_tol: float = 1e-12
    max_doublings: int = 200
    # extra doublings past the first sign change, looking for further roots
    # when delta <= 1 (uniqueness is assumed, not enforced)
    extra_scan: int = 8
    search: SearchConfig = field(default_factory=SearchConfig)
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    # pin chi = 0 (OLS); used to check the fixed-point algebra
    force_chi_zero: bool = False
    # reuse chi* from the previous bisection iterate as a local starting
    # point; the reported point is always re-solved from scratch
    warm_start: bool = True


@dataclass(frozen=True)
class SEOutcome:
    q: float
    delta: float
    sigma_w: float
    scaled: bool
    sigma_bar: float
    chi_star: float
    amse: float
    iterations: int
    residual: float
    brackets: tuple = ()

    @property
    def sigma_w_eff(self) -> float:
        return self.sigma_w / math.sqrt(self.delta) if self.scaled else self.sigma_w

    def row(self) -> dict:
        return {
            "q": self.q,
            "delta": self.delta,
            "sigma_w": self.sigma_w,
            "scaled": int(self.scaled),
            "sigma_bar": self.sigma_bar,
            "chi_star": self.chi_star,
            "amse": self.amse,
            "iterations": self.iterations,
            "residual": self.residual,
        }


CSV_COLUMNS = ["q", "delta", "sigma_w", "scaled", "sigma_bar", "chi_star", "amse", "iterations", "residual"]


@dataclass(frozen=True)
class PointFailure:
    params: dict
    error: str


def effective_noise(delta, sigma_w, scaled):
    return sigma_w / math.sqrt(delta) if scaled else sigma_w


def solve(
    q: float,
    delta: float,
    sigma_w: float,
    dist: SignalDistribution,
    scaled: bool = False,
    cfg: SEConfig = SEConfig(),
) -> SEOutcome:
    q, delta, sigma_w = float(q), float(delta), float(sigma_w)
    if not (1.0 <= q <= 2.0):
        raise InvalidArgument(f"q={q} outside [1, 2]")
    if not (delta > 0 and math.isfinite(delta)):
        raise InvalidArgument("delta must be a positive number")
    if not (sigma_w >= 0 and math.isfinite(sigma_w)):
        raise InvalidArgument("sigma_w must be >= 0")
    if sigma_w == 0.0:
        if delta <= 1.0:
            raise InvalidArgument("sigma_w = 0 requires delta > 1")
        # noiseless, delta > 1: exact recovery
        return SEOutcome(q, delta, sigma_w, scaled, 0.0, 0.0, 0.0, 0, 0.0)

    s_w = effective_noise(delta, sigma_w, scaled) ** 2
    out = _bisect(q, delta, sigma_w, s_w, dist, scaled, cfg, cfg.warm_start)
    if cfg.warm_start and out.residual > cfg.fp_tol * max(1.0, out.sigma_bar**2):
        out = _bisect(q, delta, sigma_w, s_w, dist, scaled, cfg, False)
    return out


def _bisect(q, delta, sigma_w, s_w, dist, scaled, cfg: SEConfig, warm: bool) -> SEOutcome:
    last = [0.0]

    def inner(s, cold=False) -> RiskPoint:
        sig = math.sqrt(s)
        if cfg.force_chi_zero:
            return risk(q, 0.0, sig, dist, cfg.quad)
        rp = None
        if warm and not cold and last[0] > 0:
            rp = refine_chi(q, sig, dist, last[0], cfg.search, cfg.quad)
        if rp is None:
            rp = optimal_chi(q, sig, dist, cfg.search, cfg.quad)
        last[0] = rp.chi
        return rp

    def h(s, cold=False):
        rp = inner(s, cold)
        return s - s_w - s * rp.risk / delta, rp

    iterations = 0
    brackets = ()
    if delta > 1.0:
        lo, hi = s_w, s_w / (1.0 - 1.0 / delta)
    else:
        lo, hi = s_w, 2.0 * s_w
        trace = []
        while True:
            val, _ = h(hi)
            iterations += 1
            trace.append((hi, val))
            if val >= 0:
                break
            if iterations >= cfg.max_doublings:
                raise NonConvergence("no sign change of the fixed-point map", {"trace": trace})
            lo, hi = hi, 2.0 * hi
        # look a little further for additional sign changes
        found = [(lo, hi)]
        s_prev, v_prev = hi, val
        s_next = hi
        for _ in range(cfg.extra_scan):
            s_next *= 2.0
            v_next, _ = h(s_next)
            if (v_next < 0) != (v_prev < 0):
                found.append((s_prev, s_next))
            s_prev, v_prev = s_next, v_next
        if len(found) > 1:
            brackets = tuple(found)

    while hi - lo > cfg.fp_tol * hi:
        mid = 0.5 * (lo + hi)
        val, _ = h(mid)
        iterations += 1
        if val < 0:
            lo = mid
        else:
            hi = mid

    s = 0.5 * (lo + hi)
    val, rp = h(s, cold=True)
    return SEOutcome(
        q=q,
        delta=delta,
        sigma_w=sigma_w,
        scaled=bool(scaled),
        sigma_bar=math.sqrt(s),
        chi_star=rp.chi,
        amse=s * rp.risk,
        iterations=iterations,
        residual=abs(val),
        brackets=brackets,
    )


Grid = Union[float, Sequence[float]]


def amse_curve(
    q: float,
    dist: SignalDistribution,
    delta: Grid,
    sigma_w: Grid,
    scaled: bool = False,
    cfg: SEConfig = SEConfig(),
) -> list:
    """Solve on the product of the delta and sigma_w grids (delta-major).

    Each entry is an SEOutcome, or a PointFailure when that point raised.
    """
    deltas = list(np.atleast_1d(delta).astype(float))
    sigmas = list(np.atleast_1d(sigma_w).astype(float))
    out = []
    for d in deltas:
        for s in sigmas:
            try:
                out.append(solve(q, d, s, dist, scaled, cfg))
            except (ArithmeticError, RuntimeError, ValueError) as exc:
                out.append(PointFailure({"q": q, "delta": d, "sigma_w": s, "scaled": scaled}, repr(exc)))
    return out
