"""Scalar risk R_q(chi, sigma) = E (eta_q(B/sigma + Z; chi) - B/sigma)^2 and
its minimiser over the threshold chi.

The expectation is a tensor product: the distribution's rule over |B| times
a rule over Z.  For a given b the Z-integrand is analytic except where
u = b/sigma + z crosses the kinks of eta_q (u = 0 and |u| ~ chi^(1/(2-q))).
When no kink falls inside |z| < z_cut, plain Gauss-Hermite is used.
Otherwise that b gets composite Gauss-Legendre panels on [-z_cut, z_cut]
with the kinks as panel edges, since a kink inside the Gaussian bulk
destroys the spectral accuracy of Gauss-Hermite.  For 1 < q < 2 the panel
edges are also graded geometrically toward u = 0, where eta_q is not
analytic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .dist import SignalDistribution, gauss_hermite_normal
from .errors import InvalidArgument, NumericalFailure
from .prox import prox

TIE_POLICY = "smaller-chi"
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureConfig:
    hermite_nodes: int = 61
    b_nodes: int = 200
    z_cut: float = 9.0  # 2 * Phi(-9) ~ 2e-19
    panels: int = 8
    panel_nodes: int = 16


@dataclass(frozen=True)
class SearchConfig:
    chi_grid_points: int = 64
    golden_tol: float = 1e-10
    # bracket width (relative) at which golden section hands over to a
    # root search on the derivative.  Near the minimum R varies by about
    # sigma^2 * width^2, which drops under rounding noise well before 1e-10,
    # while the sign of dR/dchi stays informative
    handover_tol: float = 1e-3
    max_extensions: int = 80
    use_hint: bool = True


@dataclass(frozen=True)
class RiskPoint:
    q: float
    chi: float
    sigma: float
    risk: float
    d_risk_dchi: float


def kinks(q: float, chi: float) -> list:
    """Points in u where eta_q(.; chi) is not analytic (or bends sharply)."""
    if q == 2.0 or chi == 0.0:
        return []
    if q == 1.0:
        return [-chi, chi]
    s = chi ** (1.0 / (2.0 - q))
    pts = [0.0]
    if math.isfinite(s):
        pts += [-s, s]
    return pts


def _graded_knots(q, chi, reach, ratio=4.0, floor=1e-4):
    """Extra panel edges in u around 0 for 1 < q < 2.

    eta_q behaves like |u|^(1/(q-1)) near 0 (not analytic there) and turns
    linear beyond the scale chi^(1/(2-q)).  Edges graded geometrically from
    ``floor`` up to ``reach`` resolve both the singular point and the
    transition."""
    if not (1.0 < q < 2.0) or chi == 0.0:
        return []
    pts = []
    s = floor
    while s < reach:
        pts += [-s, s]
        s *= ratio
    return pts


def _legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _z_rules(c, q, chi, cfg: QuadratureConfig):
    """Split the b-nodes (given as c = b/sigma) into a Gauss-Hermite group and
    a composite-panel group.  Returns (idx_gh, z_gh, w_gh, idx_cp, z_cp, w_cp)."""
    gh = gauss_hermite_normal(cfg.hermite_nodes)
    bp = np.asarray(kinks(q, chi))
    if bp.size == 0:
        near = np.zeros(c.shape, dtype=bool)
    else:
        zb = bp[None, :] - c[:, None]
        near = np.any(np.abs(zb) < cfg.z_cut, axis=1)
    idx_gh = np.flatnonzero(~near)
    idx_cp = np.flatnonzero(near)
    z_cp = w_cp = None
    if idx_cp.size:
        Z = cfg.z_cut
        base = np.linspace(-Z, Z, cfg.panels + 1)
        bp = np.asarray(sorted(set(bp.tolist()) | set(_graded_knots(q, chi, Z))))
        zb = np.clip(bp[None, :] - c[idx_cp, None], -Z, Z)
        knots = np.sort(np.concatenate([np.broadcast_to(base, (idx_cp.size, base.size)), zb], axis=1), axis=1)
        left, right = knots[:, :-1], knots[:, 1:]
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        x, w = _legendre(cfg.panel_nodes)
        z_cp = mid[..., None] + half[..., None] * x
        w_cp = half[..., None] * w * _INV_SQRT_2PI * np.exp(-0.5 * z_cp**2)
        z_cp = z_cp.reshape(idx_cp.size, -1)
        w_cp = w_cp.reshape(idx_cp.size, -1)
    return idx_gh, gh.nodes, gh.weights, idx_cp, z_cp, w_cp


def _check(q, chi, sigma):
    if not (1.0 <= q <= 2.0):
        raise InvalidArgument(f"q={q} outside [1, 2]")
    if not sigma > 0:
        raise InvalidArgument("sigma must be > 0")
    if not chi >= 0:
        raise InvalidArgument("chi must be >= 0")


def risk(q, chi, sigma, dist: SignalDistribution, quad_cfg: QuadratureConfig = QuadratureConfig()) -> RiskPoint:
    """R_q(chi, sigma) and dR/dchi, by the same quadrature."""
    q, chi, sigma = float(q), float(chi), float(sigma)
    _check(q, chi, sigma)
    rule = dist.expectation_rule(quad_cfg.b_nodes)
    c = rule.nodes / sigma
    idx_gh, z_gh, w_gh, idx_cp, z_cp, w_cp = _z_rules(c, q, chi, quad_cfg)

    per_b = np.empty(c.size)
    per_b_d = np.empty(c.size)
    if idx_gh.size:
        cc = c[idx_gh, None]
        pr = prox(cc + z_gh[None, :], chi, q)
        err = pr.value - cc
        per_b[idx_gh] = (err * err) @ w_gh
        per_b_d[idx_gh] = (2.0 * err * pr.d_dchi) @ w_gh
    if idx_cp.size:
        cc = c[idx_cp, None]
        pr = prox(cc + z_cp, chi, q)
        err = pr.value - cc
        per_b[idx_cp] = np.sum(w_cp * err * err, axis=1)
        per_b_d[idx_cp] = np.sum(w_cp * 2.0 * err * pr.d_dchi, axis=1)

    r = float(np.dot(rule.weights, per_b))
    d = float(np.dot(rule.weights, per_b_d))
    if not (math.isfinite(r) and math.isfinite(d)):
        raise NumericalFailure(
            "risk quadrature produced a non-finite value",
            {"q": q, "chi": chi, "sigma": sigma, "risk": r, "d_risk_dchi": d, "dist": dist.to_config()},
        )
    return RiskPoint(q, chi, sigma, r, d)


def chi_hint(q, sigma, dist: SignalDistribution):
    """Small-sigma optimal threshold ((q-1) E|B|^(q-2) / (q E|B|^(2q-2))) sigma^q,
    or None where it is undefined."""
    if not (1.0 < q <= 2.0):
        return None
    m1, m2 = dist.moment(q - 2.0), dist.moment(2.0 * q - 2.0)
    if not (math.isfinite(m1) and math.isfinite(m2)) or m2 <= 0:
        return None
    return (q - 1.0) * m1 / (q * m2) * sigma**q


_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def optimal_chi(
    q,
    sigma,
    dist: SignalDistribution,
    search_cfg: SearchConfig = SearchConfig(),
    quad_cfg: QuadratureConfig = QuadratureConfig(),
) -> RiskPoint:
    """Minimise R_q(., sigma) over chi >= 0.

    Coarse log-grid over [1e-4 sigma^q, 10 sigma^(q-1)] (plus the small-noise
    hint), extended geometrically if the best point sits on an edge, then
    golden section on the bracketing cell and a bracketed root search on
    dR/dchi once the bracket is narrow.  Ties go to the smaller chi.  chi = 0
    is returned when no positive chi beats R_q(0, sigma).
    """
    q, sigma = float(q), float(sigma)
    _check(q, 0.0, sigma)
    f = lambda x: risk(q, x, sigma, dist, quad_cfg)
    zero = f(0.0)

    lo, hi = 1e-4 * sigma**q, 10.0 * sigma ** (q - 1.0)
    if not lo < hi:
        lo, hi = min(lo, hi), max(lo, hi) * 10.0
    chis = list(np.geomspace(lo, hi, search_cfg.chi_grid_points))
    hint = chi_hint(q, sigma, dist) if search_cfg.use_hint else None
    if hint is not None and hint > 0 and math.isfinite(hint):
        chis.append(hint)
    chis = sorted(set(chis))
    pts = [f(x) for x in chis]
    ratio = (hi / lo) ** (1.0 / max(search_cfg.chi_grid_points - 1, 1))

    def best_index():
        vals = [p.risk for p in pts]
        return int(np.argmin(vals))  # first occurrence = smaller chi

    i = best_index()
    n_ext = 0
    while i == len(pts) - 1 and n_ext < search_cfg.max_extensions:
        pts.append(f(pts[-1].chi * ratio))
        n_ext += 1
        i = best_index()
    while i == 0 and pts[0].risk < zero.risk and n_ext < search_cfg.max_extensions:
        pts.insert(0, f(pts[0].chi / ratio))
        n_ext += 1
        i = best_index()

    if pts[i].risk >= zero.risk:
        return zero

    a = pts[i - 1].chi if i > 0 else 0.0
    b = pts[i + 1].chi if i + 1 < len(pts) else pts[i].chi * ratio
    best = pts[i]

    def narrow(a, b, tol):
        return (b - a) <= tol * 0.5 * (a + b)

    # golden section
    x1 = b - _GOLD * (b - a)
    x2 = a + _GOLD * (b - a)
    p1, p2 = f(x1), f(x2)
    for _ in range(400):
        if narrow(a, b, search_cfg.handover_tol):
            break
        if p1.risk <= p2.risk:
            b, x2, p2 = x2, x1, p1
            x1 = b - _GOLD * (b - a)
            p1 = f(x1)
        else:
            a, x1, p1 = x1, x2, p2
            x2 = a + _GOLD * (b - a)
            p2 = f(x2)
    for p in (p1, p2):
        if p.risk < best.risk:
            best = p

    # root of dR/dchi once it changes sign across the bracket, otherwise keep
    # going with golden section
    pa, pb = f(a) if a > 0 else zero, f(b)
    if pa.d_risk_dchi < 0 < pb.d_risk_dchi:
        # risk values this close to the minimum differ only by rounding, so
        # the stationary point stands on its own
        return _stationary_point(f, a, b, search_cfg.golden_tol)
    x1 = b - _GOLD * (b - a)
    x2 = a + _GOLD * (b - a)
    p1, p2 = f(x1), f(x2)
    for _ in range(400):
        if narrow(a, b, search_cfg.golden_tol):
            break
        if p1.risk <= p2.risk:
            b, x2, p2 = x2, x1, p1
            x1 = b - _GOLD * (b - a)
            p1 = f(x1)
        else:
            a, x1, p1 = x1, x2, p2
            x2 = a + _GOLD * (b - a)
            p2 = f(x2)
    final = f(0.5 * (a + b))
    return final if final.risk <= best.risk else best


def _stationary_point(f, a, b, rtol):
    """Sign change of dR/dchi on [a, b] (a may be 0), by brentq in chi.
    Brent's method keeps a bracket throughout, so this is a safeguarded
    bisection that usually needs far fewer steps."""
    cache = {}

    def d(x):
        p = f(x)
        cache[x] = p
        return p.d_risk_dchi

    root = brentq(d, a, b, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps), maxiter=200)
    return cache.get(root) or f(root)


def refine_chi(
    q,
    sigma,
    dist: SignalDistribution,
    chi0,
    search_cfg: SearchConfig = SearchConfig(),
    quad_cfg: QuadratureConfig = QuadratureConfig(),
    step=1.25,
    max_steps=40,
) -> Optional[RiskPoint]:
    """Local minimiser of R_q(., sigma) starting from a nearby guess chi0.

    Walks geometrically downhill until dR/dchi changes sign, then finds the
    stationary point.  Returns None when that fails or the point does not
    beat chi = 0; callers then fall back to optimal_chi.  Only a local
    search, meant for warm starts along a continuation path.
    """
    if not (chi0 and chi0 > 0 and math.isfinite(chi0)):
        return None
    q, sigma = float(q), float(sigma)
    f = lambda x: risk(q, x, sigma, dist, quad_cfg)
    p0 = f(chi0)
    if p0.d_risk_dchi == 0:
        return p0
    if p0.d_risk_dchi > 0:
        hi_p = p0
        for _ in range(max_steps):
            lo_p = f(hi_p.chi / step)
            if lo_p.d_risk_dchi < 0:
                break
            hi_p = lo_p
        else:
            return None
    else:
        lo_p = p0
        for _ in range(max_steps):
            hi_p = f(lo_p.chi * step)
            if hi_p.d_risk_dchi > 0:
                break
            lo_p = hi_p
        else:
            return None
    a, b = lo_p.chi, hi_p.chi
    out = _stationary_point(f, a, b, search_cfg.golden_tol)
    if out.risk >= f(0.0).risk:
        return None
    return out
