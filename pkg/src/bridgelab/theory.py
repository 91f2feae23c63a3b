"""Closed-form results: OLS and ridge AMSE, the second-order expansions of
the optimally tuned AMSE (small noise and large delta), the constant C_q
that ranks q in (1, 2], and its maximiser q*.

The q = 1 rates are only known up to constants and iterated-log factors,
so they are reported as exponent brackets with validity
"lasso-bracket-only": second_term holds -sigma_w^(2l+2) (or
-delta^(-l-1)), which pins the rate and nothing else.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .dist import SignalDistribution
from .errors import Inapplicable, InvalidArgument

VALID = "valid"
LASSO_BRACKET = "lasso-bracket-only"
INAPPLICABLE = "inapplicable"

# slack on the small-ball condition P(|B| <= t) = O(t^(2-q+eps))
APPLICABILITY_EPS = 1e-3


@dataclass(frozen=True)
class ExpansionReport:
    q: float
    delta: float
    sigma_w: float
    first_term: float
    second_term: float
    validity: str
    cq: Optional[float] = None
    notes: str = ""

    @property
    def approximation(self) -> float:
        return self.first_term + self.second_term


def ols_amse(delta, sigma_w):
    if not delta > 1:
        raise Inapplicable("least squares needs delta > 1")
    return sigma_w**2 / (1.0 - 1.0 / delta)


def ridge_chi(lam, delta):
    """Threshold chi of the scalar channel equivalent to ridge with penalty
    lam * ||beta||^2 (positive root of the calibration quadratic)."""
    if lam < 0:
        raise InvalidArgument("lambda must be >= 0")
    b = delta - 1.0 - 2.0 * lam * delta
    return (-b + math.sqrt(b * b + 8.0 * lam * delta**2)) / (4.0 * delta)


def ridge_amse_closed(lam, delta, sigma_w, dist: SignalDistribution):
    chi = ridge_chi(lam, delta)
    den = delta * (1.0 + 2.0 * chi) ** 2 - 1.0
    if not den > 0:
        raise Inapplicable(f"ridge formula undefined at lambda={lam}, delta={delta}")
    return delta * (4.0 * chi**2 * dist.moment(2.0) + sigma_w**2) / den


@dataclass(frozen=True)
class RidgeOptimum:
    lam: float
    amse: float
    grid_lam: np.ndarray
    grid_amse: np.ndarray


def ridge_amse_min(delta, sigma_w, dist, points=200, lam_range=(1e-5, 1e2), refine=True) -> RidgeOptimum:
    """Minimise the closed-form ridge AMSE over a log-lambda grid, then
    polish inside the winning cell with a bounded scalar search."""
    grid = np.geomspace(lam_range[0], lam_range[1], points)
    vals = []
    for lam in grid:
        try:
            vals.append(ridge_amse_closed(lam, delta, sigma_w, dist))
        except Inapplicable:
            vals.append(math.inf)
    vals = np.asarray(vals)
    if not np.isfinite(vals).any():
        raise Inapplicable("ridge formula undefined on the whole grid")
    i = int(np.argmin(vals))
    lam_best, amse_best = float(grid[i]), float(vals[i])
    if refine:
        lo = math.log(grid[max(i - 1, 0)])
        hi = math.log(grid[min(i + 1, points - 1)])

        def f(t):
            try:
                return ridge_amse_closed(math.exp(t), delta, sigma_w, dist)
            except Inapplicable:
                return math.inf

        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if res.fun < amse_best:
            lam_best, amse_best = math.exp(res.x), float(res.fun)
    return RidgeOptimum(lam_best, amse_best, grid, vals)


def cq(q, dist: SignalDistribution):
    """C_q = (q-1)^2 (E|B|^(q-2))^2 / E|B|^(2q-2)."""
    q = float(q)
    if not (1.0 < q <= 2.0):
        raise InvalidArgument(f"C_q needs q in (1, 2], got {q}")
    m1 = dist.moment(q - 2.0)
    m2 = dist.moment(2.0 * q - 2.0)
    if not (math.isfinite(m1) and math.isfinite(m2)):
        raise Inapplicable(f"E|B|^{q - 2:g} or E|B|^{2 * q - 2:g} diverges")
    return (q - 1.0) ** 2 * m1 * m1 / m2


def _bulk_branch(q, dist):
    """Shared applicability test for q in (1, 2].  Returns (cq, note) or
    raises Inapplicable."""
    ell = dist.cdf_zero_exponent()
    if q < 2.0 and ell is not None and not ell > 2.0 - q + APPLICABILITY_EPS:
        raise Inapplicable(
            f"small-ball exponent {ell:g} does not exceed 2-q={2 - q:g} (E|B|^(q-2) may diverge)"
        )
    c = cq(q, dist)
    note = "mass bounded away from zero" if ell is None else f"small-ball exponent {ell:g}"
    return c, note


def _check_common(q, delta, sigma_w):
    if not (1.0 <= q <= 2.0):
        raise InvalidArgument(f"q={q} outside [1, 2]")
    if not delta > 1:
        raise Inapplicable("expansions need delta > 1")
    if not sigma_w > 0:
        raise InvalidArgument("sigma_w must be > 0")


def small_noise_expansion(q, delta, sigma_w, dist: SignalDistribution) -> ExpansionReport:
    """AMSE ~ sigma_w^2/(1-1/delta) - delta^3 C_q sigma_w^4/(delta-1)^3 as sigma_w -> 0."""
    q, delta, sigma_w = float(q), float(delta), float(sigma_w)
    _check_common(q, delta, sigma_w)
    first = ols_amse(delta, sigma_w)
    if q == 1.0:
        ell = dist.cdf_zero_exponent()
        if ell is None:
            return ExpansionReport(q, delta, sigma_w, first, 0.0, VALID, None, "exponentially small")
        expo = 2.0 * ell + 2.0
        return ExpansionReport(
            q, delta, sigma_w, first, -(sigma_w**expo), LASSO_BRACKET, None,
            f"rate sigma_w^{expo:g} up to constants and iterated-log factors",
        )
    try:
        c, note = _bulk_branch(q, dist)
    except Inapplicable as exc:
        return ExpansionReport(q, delta, sigma_w, first, math.nan, INAPPLICABLE, None, str(exc))
    second = -(delta**3) * c * sigma_w**4 / (delta - 1.0) ** 3
    return ExpansionReport(q, delta, sigma_w, first, second, VALID, c, note)


def large_delta_expansion(q, delta, sigma_w, dist: SignalDistribution) -> ExpansionReport:
    """Scaled model y = X beta + w / sqrt(delta):
    AMSE ~ sigma_w^2/delta + (sigma_w^2/delta^2)(1 - C_q sigma_w^2) as delta -> inf."""
    q, delta, sigma_w = float(q), float(delta), float(sigma_w)
    _check_common(q, delta, sigma_w)
    first = sigma_w**2 / delta
    if q == 1.0:
        ell = dist.cdf_zero_exponent()
        if ell is None:
            # (q-1)^2 kills the correction, leaving the unit bracket
            return ExpansionReport(
                q, delta, sigma_w, first, sigma_w**2 / delta**2, VALID, 0.0, "C_q factor vanishes at q=1"
            )
        if not 0.0 < ell < 1.0:
            return ExpansionReport(
                q, delta, sigma_w, first, math.nan, INAPPLICABLE, None,
                f"rate known only for small-ball exponent in (0, 1), got {ell:g}",
            )
        expo = -ell - 1.0
        return ExpansionReport(
            q, delta, sigma_w, first, -(delta**expo), LASSO_BRACKET, None,
            f"rate delta^{expo:g} up to constants and iterated-log factors",
        )
    try:
        c, note = _bulk_branch(q, dist)
    except Inapplicable as exc:
        return ExpansionReport(q, delta, sigma_w, first, math.nan, INAPPLICABLE, None, str(exc))
    second = sigma_w**2 / delta**2 * (1.0 - c * sigma_w**2)
    return ExpansionReport(q, delta, sigma_w, first, second, VALID, c, note)


def small_noise_limit(q, delta, dist):
    """Limit of (AMSE - sigma_w^2/(1-1/delta)) / sigma_w^4 for q in (1, 2]."""
    return -(delta**3) * cq(q, dist) / (delta - 1.0) ** 3


@dataclass(frozen=True)
class QStarConfig:
    points: int = 200
    left: float = 1.0 + 1e-3
    xatol: float = 1e-8


def q_star(dist: SignalDistribution, grid_cfg: QStarConfig = QStarConfig()):
    """Maximise C_q over (1, 2].

    Returns (q_star, curve) where curve is a list of (q, C_q) pairs; grid
    points where C_q is undefined carry None.
    """
    grid = np.linspace(grid_cfg.left, 2.0, grid_cfg.points)
    curve = []
    for q in grid:
        try:
            curve.append((float(q), cq(q, dist)))
        except Inapplicable:
            curve.append((float(q), None))
    ok = [(i, v) for i, (_, v) in enumerate(curve) if v is not None]
    if not ok:
        raise Inapplicable("C_q undefined on the whole grid")
    i = max(ok, key=lambda t: t[1])[0]
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]

    def neg(q):
        try:
            return -cq(q, dist)
        except Inapplicable:
            return 1e300  # finite, so the bounded search stays well defined

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": grid_cfg.xatol})
    # the bounded search never lands exactly on a bracket end, so compare
    # the ends explicitly; ties go to the larger q
    cands = [(float(res.x), -float(res.fun)), (float(lo), -neg(lo)), (float(hi), -neg(hi))]
    cands = [c for c in cands if c[1] > -1e300]
    best_q, best_c = max(cands, key=lambda t: (t[1], t[0]))
    return best_q, curve
