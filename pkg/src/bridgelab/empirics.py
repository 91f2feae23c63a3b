"""Finite-size Monte Carlo for bridge regression.

Instances follow the Gaussian design X_ij ~ N(0, 1/n).  The estimator

    argmin_b 0.5 * ||y - X b||^2 + lam * ||b||_q^q

is computed by monotone proximal gradient with step 1/L.  The proximal map
of step * lam * |z|^q is prox(., step * lam, q).  Gradients use the Gram
matrix X^T X, which halves the per-iteration cost when n > p.  The final
objective is recomputed from X directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dist import SignalDistribution
from .errors import InvalidArgument, NonConvergence
from .prox import prox_value


@dataclass(frozen=True, eq=False)
class Instance:
    n: int
    p: int
    X: np.ndarray
    beta: np.ndarray
    w: np.ndarray
    y: np.ndarray
    sigma_w: float
    scaled: bool
    seed: int

    @property
    def delta(self) -> float:
        return self.n / self.p


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-9
    max_iter: int = 50000
    power_iters: int = 50
    lipschitz_inflation: float = 1.01


@dataclass(eq=False)
class SolveResult:
    beta_hat: np.ndarray
    lam: float
    q: float
    objective: float
    grad_norm: float  # gradient-mapping norm / sqrt(p)
    iterations: int
    mse: float
    step: float = math.nan
    objective_trace: Optional[np.ndarray] = field(default=None, repr=False)


def _child_seeds(seed: int, k: int):
    ss = np.random.SeedSequence(int(seed))
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(k)]


def generate(n: int, p: int, dist: SignalDistribution, sigma_w: float, scaled: bool, seed: int) -> Instance:
    if n < 1 or p < 1:
        raise InvalidArgument("n and p must be >= 1")
    if sigma_w < 0:
        raise InvalidArgument("sigma_w must be >= 0")
    s_x, s_b, s_w = _child_seeds(seed, 3)
    X = np.random.default_rng(s_x).standard_normal((n, p)) / math.sqrt(n)
    beta = dist.sample(p, s_b)
    w = sigma_w * np.random.default_rng(s_w).standard_normal(n)
    w_eff = w / math.sqrt(n / p) if scaled else w
    y = X @ beta + w_eff
    return Instance(n, p, X, beta, w, y, float(sigma_w), bool(scaled), int(seed))


def objective(inst: Instance, b, lam, q) -> float:
    r = inst.y - inst.X @ b
    return 0.5 * float(r @ r) + lam * float(np.sum(np.abs(b) ** q))


class _Problem:
    """Per-instance cache: Gram matrix, X^T y and the step size."""

    def __init__(self, inst: Instance, cfg: SolverConfig):
        self.inst = inst
        self.G = inst.X.T @ inst.X
        self.Xty = inst.X.T @ inst.y
        self.yy = float(inst.y @ inst.y)
        v = np.random.default_rng(0).standard_normal(inst.p)
        v /= np.linalg.norm(v)
        ev = 0.0
        for _ in range(cfg.power_iters):
            gv = self.G @ v
            ev = float(np.linalg.norm(gv))
            if ev == 0.0:
                break
            v = gv / ev
        self.L = cfg.lipschitz_inflation * max(ev, 1e-300)

    def smooth(self, b, Gb):
        # 0.5 ||y - X b||^2 from Gram quantities
        return 0.5 * (self.yy - 2.0 * float(b @ self.Xty) + float(b @ Gb))


_PROBLEMS: dict = {}


def _problem(inst: Instance, cfg: SolverConfig) -> _Problem:
    key = (id(inst), cfg.power_iters, cfg.lipschitz_inflation)
    hit = _PROBLEMS.get(key)
    if hit is None or hit.inst is not inst:
        if len(_PROBLEMS) > 8:
            _PROBLEMS.clear()
        hit = _PROBLEMS[key] = _Problem(inst, cfg)
    return hit


def solve_lqls(
    inst: Instance,
    lam: float,
    q: float,
    solver_cfg: SolverConfig = SolverConfig(),
    warm_start=None,
    keep_trace: bool = False,
) -> SolveResult:
    if not lam >= 0:
        raise InvalidArgument("lambda must be >= 0")
    if not (1.0 <= q <= 2.0):
        raise InvalidArgument(f"q={q} outside [1, 2]")
    pb = _problem(inst, solver_cfg)
    step = 1.0 / pb.L
    p = inst.p
    b = np.zeros(p) if warm_start is None else np.array(warm_start, dtype=float)
    Gb = pb.G @ b

    def pen(z):
        return lam * float(np.sum(np.abs(z) ** q))

    F = pb.smooth(b, Gb) + pen(b)
    trace = [F] if keep_trace else None
    res = math.inf
    it = 0
    for it in range(1, solver_cfg.max_iter + 1):
        grad = Gb - pb.Xty
        cand = prox_value(b - step * grad, step * lam, q)
        # gradient-mapping norm: the step difference divided by the step
        res = float(np.linalg.norm(cand - b)) / (step * math.sqrt(p))
        if res <= solver_cfg.tol * (1.0 + float(np.linalg.norm(b)) / math.sqrt(p)):
            break
        Gc = pb.G @ cand
        Fc = pb.smooth(cand, Gc) + pen(cand)
        if Fc > F:
            # halve once, then accept whatever comes out
            cand = prox_value(b - 0.5 * step * grad, 0.5 * step * lam, q)
            Gc = pb.G @ cand
            Fc = pb.smooth(cand, Gc) + pen(cand)
        b, Gb, F = cand, Gc, Fc
        if keep_trace:
            trace.append(F)
    else:
        raise NonConvergence(
            f"proximal gradient hit {solver_cfg.max_iter} iterations",
            {"beta": b, "residual": res, "lambda": lam, "q": q},
        )
    err = b - inst.beta
    return SolveResult(
        beta_hat=b,
        lam=float(lam),
        q=float(q),
        objective=objective(inst, b, lam, q),
        grad_norm=res,
        iterations=it,
        mse=float(err @ err) / p,
        step=step,
        objective_trace=np.asarray(trace) if keep_trace else None,
    )


def fixed_point_residual(inst: Instance, res: SolveResult) -> float:
    """||b - prox(b + s X^T (y - X b); s lam)|| / (s sqrt(p)), from X directly."""
    b = res.beta_hat
    g = inst.X.T @ (inst.y - inst.X @ b)
    moved = prox_value(b + res.step * g, res.step * res.lam, res.q)
    return float(np.linalg.norm(b - moved)) / (res.step * math.sqrt(inst.p))


def tikhonov(inst: Instance, lam: float) -> np.ndarray:
    """Exact minimiser for q = 2: (X^T X + 2 lam I)^(-1) X^T y."""
    A = inst.X.T @ inst.X + 2.0 * lam * np.eye(inst.p)
    return np.linalg.solve(A, inst.X.T @ inst.y)


def lambda_sweep(inst: Instance, q: float, lambda_grid: Sequence[float], solver_cfg: SolverConfig = SolverConfig()):
    """Solve along the grid from the largest lambda down, warm-starting each
    solve from the previous one.  Returns (best, curve) with curve in the
    order of ``lambda_grid``; ties on mse go to the larger lambda."""
    grid = [float(x) for x in lambda_grid]
    if not grid:
        raise InvalidArgument("lambda grid is empty")
    if min(grid) < 0:
        raise InvalidArgument("lambda values must be >= 0")
    order = sorted(range(len(grid)), key=lambda i: -grid[i])
    curve = [None] * len(grid)
    warm = None
    best = None
    for i in order:
        r = solve_lqls(inst, grid[i], q, solver_cfg, warm_start=warm)
        curve[i] = r
        warm = r.beta_hat
        if best is None or r.mse < best.mse:
            best = r
    return best, curve


MC_COLUMNS = ["seed", "n", "p", "q", "lambda", "iterations", "grad_norm", "mse", "se_amse", "rel_err"]


def mc_rows(inst: Instance, q: float, lambda_grid, se_amse: float, solver_cfg: SolverConfig = SolverConfig()):
    """CSV rows for one (seed, q): the whole lambda curve.  rel_err is
    reported on every row against the state-evolution AMSE."""
    best, curve = lambda_sweep(inst, q, lambda_grid, solver_cfg)
    rows = []
    for r in curve:
        rows.append({
            "seed": inst.seed, "n": inst.n, "p": inst.p, "q": q, "lambda": r.lam,
            "iterations": r.iterations, "grad_norm": r.grad_norm, "mse": r.mse,
            "se_amse": se_amse, "rel_err": (r.mse - se_amse) / se_amse,
        })
    return best, rows
