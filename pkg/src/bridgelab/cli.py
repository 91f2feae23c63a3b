"""Batch front-end.

    bridgelab <subcommand> --config cfg.json --out rows.csv [--threads N]

Subcommands: amse, expand, qstar, mc, phase, prox-selftest.  Each run
writes the CSV plus ``<out>.manifest.json`` (config echo, version, wall
time, failures).  Exit status is 0 when every point succeeded, 1 when some
point failed (completed rows are kept) and 2 for a bad config.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from . import empirics, prox, se, theory
from .dist import SignalDistribution, from_config
from .errors import InvalidArgument
from .risk import QuadratureConfig, SearchConfig

SUBCOMMANDS = ("amse", "expand", "qstar", "mc", "phase", "prox-selftest")
EXPANSION_COLUMNS = ["q", "delta", "sigma_w", "first_term", "second_term", "validity", "se_amse", "residual_ratio"]
CQ_COLUMNS = ["q", "cq"]
SELFTEST_COLUMNS = ["check", "value"]


class ConfigError(InvalidArgument):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class QuadratureSection:
    hermite_nodes: int = 61
    b_nodes: int = 200


@dataclass
class SolverSection:
    fp_tol: float = 1e-12
    chi_grid_points: int = 64
    golden_tol: float = 1e-10


@dataclass
class MCSection:
    n: int = 2000
    p: int = 1000
    seeds: list = field(default_factory=lambda: list(range(10)))
    fista_tol: float = 1e-9
    max_iter: int = 50000
    scaled: bool = False


@dataclass
class ExperimentConfig:
    dist: Optional[dict] = None
    q_grid: list = field(default_factory=list)
    delta_grid: list = field(default_factory=list)
    sigma_w_grid: list = field(default_factory=list)
    lambda_grid: list = field(default_factory=list)
    # noise model for amse/phase/expand; expand with family "large_delta"
    # always uses the scaled model
    scaled: bool = False
    family: str = "small_noise"
    quadrature: QuadratureSection = field(default_factory=QuadratureSection)
    solver: SolverSection = field(default_factory=SolverSection)
    mc: MCSection = field(default_factory=MCSection)

    def signal(self) -> SignalDistribution:
        return from_config(self.dist)

    def se_config(self) -> se.SEConfig:
        return se.SEConfig(
            fp_tol=self.solver.fp_tol,
            search=SearchConfig(chi_grid_points=self.solver.chi_grid_points, golden_tol=self.solver.golden_tol),
            quad=QuadratureConfig(hermite_nodes=self.quadrature.hermite_nodes, b_nodes=self.quadrature.b_nodes),
        )

    def solver_config(self) -> empirics.SolverConfig:
        return empirics.SolverConfig(tol=self.mc.fista_tol, max_iter=self.mc.max_iter)

    def echo(self) -> dict:
        return asdict(self)


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected an object")
    known = set(cls.__dataclass_fields__)
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"{name}.{sorted(extra)[0]}", "unknown field")
    return cls(**raw)


def _real_list(raw, name):
    if not isinstance(raw, list):
        raise ConfigError(name, "expected a list of numbers")
    out = []
    for i, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{name}[{i}]", "expected a finite number")
        out.append(float(v))
    return out


def _positive(value, name, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, "expected a number")
    if integer and int(value) != value:
        raise ConfigError(name, "expected an integer")
    if not value > 0:
        raise ConfigError(name, "must be > 0")


REQUIRED = {
    "amse": ("dist", "q_grid", "delta_grid", "sigma_w_grid"),
    "expand": ("dist", "q_grid", "delta_grid", "sigma_w_grid"),
    "qstar": ("dist",),
    "mc": ("dist", "q_grid", "sigma_w_grid", "lambda_grid"),
    "phase": ("dist", "q_grid", "delta_grid", "sigma_w_grid"),
    "prox-selftest": (),
}


def parse_config(raw: dict, subcommand: str) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    extra = set(raw) - known
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown field")
    try:
        cfg = ExperimentConfig(
            dist=raw.get("dist"),
            q_grid=_real_list(raw.get("q_grid", []), "q_grid"),
            delta_grid=_real_list(raw.get("delta_grid", []), "delta_grid"),
            sigma_w_grid=_real_list(raw.get("sigma_w_grid", []), "sigma_w_grid"),
            lambda_grid=_real_list(raw.get("lambda_grid", []), "lambda_grid"),
            scaled=raw.get("scaled", False),
            family=raw.get("family", "small_noise"),
            quadrature=_section(QuadratureSection, raw.get("quadrature"), "quadrature"),
            solver=_section(SolverSection, raw.get("solver"), "solver"),
            mc=_section(MCSection, raw.get("mc"), "mc"),
        )
    except TypeError as exc:
        raise ConfigError("<root>", str(exc)) from None

    if not isinstance(cfg.scaled, bool):
        raise ConfigError("scaled", "expected true or false")
    if cfg.family not in ("small_noise", "large_delta"):
        raise ConfigError("family", "expected 'small_noise' or 'large_delta'")
    for name in REQUIRED[subcommand]:
        value = getattr(cfg, name)
        if value is None or (isinstance(value, list) and not value):
            raise ConfigError(name, f"required by '{subcommand}'")
    if cfg.dist is not None:
        try:
            cfg.signal()
        except (InvalidArgument, TypeError) as exc:
            raise ConfigError("dist", str(exc)) from None
    for i, q in enumerate(cfg.q_grid):
        if not 1.0 <= q <= 2.0:
            raise ConfigError(f"q_grid[{i}]", "must lie in [1, 2]")
    for i, d in enumerate(cfg.delta_grid):
        if not d > 0:
            raise ConfigError(f"delta_grid[{i}]", "must be > 0")
    for i, s in enumerate(cfg.sigma_w_grid):
        if s < 0:
            raise ConfigError(f"sigma_w_grid[{i}]", "must be >= 0")
    for i, s in enumerate(cfg.lambda_grid):
        if s < 0:
            raise ConfigError(f"lambda_grid[{i}]", "must be >= 0")
    _positive(cfg.quadrature.hermite_nodes, "quadrature.hermite_nodes", integer=True)
    _positive(cfg.quadrature.b_nodes, "quadrature.b_nodes", integer=True)
    if cfg.quadrature.b_nodes < 8:
        raise ConfigError("quadrature.b_nodes", "must be >= 8")
    _positive(cfg.solver.fp_tol, "solver.fp_tol")
    _positive(cfg.solver.chi_grid_points, "solver.chi_grid_points", integer=True)
    _positive(cfg.solver.golden_tol, "solver.golden_tol")
    _positive(cfg.mc.n, "mc.n", integer=True)
    _positive(cfg.mc.p, "mc.p", integer=True)
    _positive(cfg.mc.fista_tol, "mc.fista_tol")
    _positive(cfg.mc.max_iter, "mc.max_iter", integer=True)
    if not isinstance(cfg.mc.scaled, bool):
        raise ConfigError("mc.scaled", "expected true or false")
    if subcommand == "mc" and not cfg.mc.seeds:
        raise ConfigError("mc.seeds", "required by 'mc'")
    for i, s in enumerate(cfg.mc.seeds):
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError(f"mc.seeds[{i}]", "expected a non-negative integer")
    return cfg


def load_config(path, subcommand) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return parse_config(raw, subcommand)


# ---------------------------------------------------------------------------
# subcommands: each returns (columns, rows, failures, summary)


def _pmap(fn, items, threads):
    """Apply fn to each item, returning results (or the exception) in input order."""

    def safe(item):
        try:
            return fn(item)
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            return exc

    if threads <= 1:
        return [safe(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(safe, items))


def _failure(params, exc):
    return {"params": params, "error": type(exc).__name__, "message": str(exc)}


def _se_sweep(cfg, points, scaled, threads):
    dist, sc = cfg.signal(), cfg.se_config()
    results = _pmap(lambda t: se.solve(t[0], t[1], t[2], dist, scaled, sc), points, threads)
    rows, failures = [], []
    for (q, d, s), r in zip(points, results):
        if isinstance(r, Exception):
            failures.append(_failure({"q": q, "delta": d, "sigma_w": s, "scaled": scaled}, r))
        else:
            rows.append(r.row())
    return rows, failures


def cmd_amse(cfg: ExperimentConfig, threads):
    points = [(q, d, s) for q in cfg.q_grid for d in cfg.delta_grid for s in cfg.sigma_w_grid]
    rows, failures = _se_sweep(cfg, points, cfg.scaled, threads)
    return se.CSV_COLUMNS, rows, failures, None


def cmd_phase(cfg: ExperimentConfig, threads):
    s = min(cfg.sigma_w_grid)
    points = [(q, d, s) for q in cfg.q_grid for d in cfg.delta_grid]
    rows, failures = _se_sweep(cfg, points, cfg.scaled, threads)
    return se.CSV_COLUMNS, rows, failures, None


def cmd_expand(cfg: ExperimentConfig, threads):
    dist, sc = cfg.signal(), cfg.se_config()
    large = cfg.family == "large_delta"
    expand = theory.large_delta_expansion if large else theory.small_noise_expansion
    points = [(q, d, s) for q in cfg.q_grid for d in cfg.delta_grid for s in cfg.sigma_w_grid]

    def one(t):
        q, d, s = t
        rep = expand(q, d, s, dist)
        out = se.solve(q, d, s, dist, large or cfg.scaled, sc)
        gap = out.amse - rep.first_term
        ratio = gap / rep.second_term if rep.second_term not in (0.0,) and math.isfinite(rep.second_term) else math.nan
        return {
            "q": q, "delta": d, "sigma_w": s, "first_term": rep.first_term,
            "second_term": rep.second_term, "validity": rep.validity,
            "se_amse": out.amse, "residual_ratio": ratio,
        }

    rows, failures = [], []
    for t, r in zip(points, _pmap(one, points, threads)):
        if isinstance(r, Exception):
            failures.append(_failure(dict(zip(("q", "delta", "sigma_w"), t)), r))
        else:
            rows.append(r)
    return EXPANSION_COLUMNS, rows, failures, None


def cmd_qstar(cfg: ExperimentConfig, threads):
    qs, curve = theory.q_star(cfg.signal())
    rows = [{"q": q, "cq": "" if c is None else c} for q, c in curve]
    failures = [{"params": {"q": q}, "error": "Inapplicable", "message": "C_q undefined"} for q, c in curve if c is None]
    # undefined grid points are excluded by design, not failures of the run
    return CQ_COLUMNS, rows, [], {"q_star": qs, "excluded": failures, "line": f"q_star={qs:.3f}"}


def cmd_mc(cfg: ExperimentConfig, threads):
    dist, sc, solver = cfg.signal(), cfg.se_config(), cfg.solver_config()
    n, p, scaled = cfg.mc.n, cfg.mc.p, cfg.mc.scaled
    delta = n / p
    failures = []
    targets = {}
    for s in cfg.sigma_w_grid:
        for q in cfg.q_grid:
            try:
                targets[(s, q)] = se.solve(q, delta, s, dist, scaled, sc).amse
            except (ArithmeticError, RuntimeError, ValueError) as exc:
                targets[(s, q)] = math.nan
                failures.append(_failure({"q": q, "delta": delta, "sigma_w": s, "stage": "se"}, exc))

    tasks = [(s, seed) for s in cfg.sigma_w_grid for seed in cfg.mc.seeds]

    def one(t):
        s, seed = t
        inst = empirics.generate(n, p, dist, s, scaled, seed)
        out = []
        for q in cfg.q_grid:
            try:
                _, rows = empirics.mc_rows(inst, q, cfg.lambda_grid, targets[(s, q)], solver)
                out.append(rows)
            except (ArithmeticError, RuntimeError, ValueError) as exc:
                out.append(exc)
        return out

    rows = []
    for (s, seed), res in zip(tasks, _pmap(one, tasks, threads)):
        if isinstance(res, Exception):
            failures.append(_failure({"sigma_w": s, "seed": seed}, res))
            continue
        for q, r in zip(cfg.q_grid, res):
            if isinstance(r, Exception):
                failures.append(_failure({"sigma_w": s, "seed": seed, "q": q}, r))
            else:
                rows.extend(r)
    return empirics.MC_COLUMNS, rows, failures, None


def cmd_selftest(cfg, threads):
    res = prox.property_battery()
    rows = [{"check": k, "value": res[k]} for k in ("fixed_point", "odd", "scale", "fd_du", "fd_dchi", "count")]
    failures = [] if res["passed"] else [{"params": {}, "error": "SelfTest", "message": json.dumps(res)}]
    return SELFTEST_COLUMNS, rows, failures, {"line": "prox-selftest " + ("ok" if res["passed"] else "FAILED")}


COMMANDS = {
    "amse": cmd_amse,
    "expand": cmd_expand,
    "qstar": cmd_qstar,
    "mc": cmd_mc,
    "phase": cmd_phase,
    "prox-selftest": cmd_selftest,
}


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in columns})


def run(subcommand, config_path, out_path, threads=None) -> int:
    threads = threads or os.cpu_count() or 1
    t0 = time.perf_counter()
    try:
        if config_path is None:
            if subcommand != "prox-selftest":
                raise ConfigError("--config", "required")
            cfg = ExperimentConfig()
        else:
            cfg = load_config(config_path, subcommand)
    except ConfigError as exc:
        print(f"bridgelab: bad config: {exc}", file=sys.stderr)
        return 2

    columns, rows, failures, summary = COMMANDS[subcommand](cfg, threads)
    if out_path:
        write_csv(out_path, columns, rows)
        manifest = {
            "subcommand": subcommand,
            "version": __version__,
            "config": cfg.echo(),
            "wall_time_s": time.perf_counter() - t0,
            "threads": threads,
            "blas_threads": os.environ.get("OPENBLAS_NUM_THREADS") or os.environ.get("OMP_NUM_THREADS"),
            "numpy": np.__version__,
            "rows": len(rows),
            "failures": failures,
        }
        if summary:
            manifest["summary"] = {k: v for k, v in summary.items() if k != "line"}
        with open(out_path + ".manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, default=str)
    if summary and "line" in summary:
        print(summary["line"])
    for f in failures:
        print(f"bridgelab: point failed {f['params']}: {f['error']}: {f['message']}", file=sys.stderr)
    return 1 if failures else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="bridgelab", description="bridge regression AMSE lab")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", default=None)
    ap.add_argument("--out", default=None)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)
    if args.subcommand != "prox-selftest" and not args.out:
        ap.error("--out is required")
    if args.threads is not None and args.threads < 1:
        ap.error("--threads must be >= 1")
    return run(args.subcommand, args.config, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
