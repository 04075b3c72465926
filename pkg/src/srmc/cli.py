"""Command line front end: ``srmc <command> --config <file> --out <dir>``.

Each run reads one JSON config, writes ``<command>.csv`` (plus extra CSVs for
the minimizers) and a ``<command>.json`` report into the output directory.
Exit codes: 0 success, 2 invalid input, 3 numerical failure or failed check.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import jsonschema
import numpy as np

from . import __version__, kernels
from .chart import ChartPoint, MetricError, MetricField, nabla_t_residual
from .fields import FieldDomainError, ParseError, ScalarField
from .foliation import (
    foliate_family,
    horizontality_residual,
    integrate_characteristic,
    max_workers,
    mean_curvature_along,
)
from .geodesics import compare_with_characteristic, geodesic_residual, integrate_geodesic
from .graph import BumpFunction, DomainError, ExprGraph, GraphDomain, embed_point
from .gridio import read_grid, write_grid, write_table
from .minimizer import GridField, minimize_intrinsic, minimize_tgraph
from .variation import (
    Quadrature,
    area,
    first_variation,
    fd_variation_oracle,
    geometric_first_variation,
    VariationReport,
)

COMMANDS = ("area", "variation", "foliate", "geodesic", "curvature", "minimize-intrinsic", "minimize-tgraph", "check")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

_expr = {"type": ["string", "number"]}
_point2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "properties": {
        "metric": {
            "oneOf": [
                {"type": "string"},
                {
                    "type": "object",
                    "properties": {"g11": _expr, "g12": _expr, "g22": _expr},
                    "required": ["g11", "g12", "g22"],
                    "additionalProperties": False,
                },
                {"type": "array", "items": _expr, "minItems": 3, "maxItems": 3},
            ]
        },
        "u": {
            "oneOf": [
                _expr,
                {
                    "type": "object",
                    "properties": {"grid": {"type": "string"}, "method": {"enum": ["linear", "cubic"]}},
                    "required": ["grid"],
                    "additionalProperties": False,
                },
            ]
        },
        "f": _expr,
        "domain": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
        "quadrature": {
            "type": "object",
            "properties": {
                "rule": {"enum": ["gauss", "midpoint"]},
                "order": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "params": {
            "type": "object",
            "properties": {
                "tests": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 5},
                },
                "fd_step": {"type": "number", "exclusiveMinimum": 0},
                "seed": _point2,
                "seeds": {"type": "array", "items": _point2, "minItems": 1},
                "eps": {"type": "array", "items": {"type": "number"}, "minItems": 2},
                "s_range": _point2,
                "step": {"type": "number", "exclusiveMinimum": 0},
                "window": {"type": "integer", "minimum": 3},
                "start": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                "theta0": {"type": "number"},
                "h": _expr,
                "length": {"type": "number", "exclusiveMinimum": 0},
                "shape": {"type": "array", "items": {"type": "integer", "minimum": 3}, "minItems": 2, "maxItems": 2},
                "interior": {"type": ["number", "null"]},
                "steps": {"type": "integer", "minimum": 0},
                "gtol": {"type": "number", "exclusiveMinimum": 0},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "eps_schedule": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
    },
    "required": ["u"],
    "additionalProperties": False,
}

DEFAULT_TOLERANCES = {
    "variation_rel": 1e-5,
    "variation_abs": 1e-7,
    "geodesic": 1e-6,
    "curvature": 1e-6,
    "nabla_t": 1e-6,
}


class ConfigError(ValueError):
    """Invalid configuration (exit code 2)."""


class NumericalFailure(RuntimeError):
    """A solver did not converge or a check failed (exit code 3)."""


# ---------------------------------------------------------------------------
# configuration


class Problem:
    """A validated config with its parsed objects."""

    def __init__(self, config: dict, base_dir: str):
        try:
            jsonschema.validate(config, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config field '{where}': {exc.message}") from exc
        self.config = config
        self.params = config.get("params", {})
        self.tolerances = {**DEFAULT_TOLERANCES, **config.get("tolerances", {})}
        bounds = config.get("domain", [0.0, 1.0, 0.0, 1.0])
        try:
            self.domain = GraphDomain(*(float(b) for b in bounds))
        except ValueError as exc:
            raise ConfigError(f"config field 'domain': {exc}") from exc
        self.metric = _field("metric", lambda: MetricField.from_config(config.get("metric", "heisenberg")))
        self.f_source = config.get("f", 0.0)
        self.f = _field("f", lambda: ScalarField(self.f_source))
        self.quad = Quadrature(**config.get("quadrature", {}))
        u_cfg = config["u"]
        self.grid = None
        if isinstance(u_cfg, dict):
            path = u_cfg["grid"] if os.path.isabs(u_cfg["grid"]) else os.path.join(base_dir, u_cfg["grid"])
            try:
                self.grid = read_grid(path)
            except FileNotFoundError as exc:
                raise ConfigError(f"config field 'u': grid file not found: {path}") from exc
            except ValueError as exc:
                raise ConfigError(f"config field 'u': {exc}") from exc
            self.domain = self.grid.domain
            self.u_field = None
            self._u = self.grid.as_graph(u_cfg.get("method", "linear"))
        else:
            self.u_field = _field("u", lambda: ScalarField(u_cfg))
            self._u = None
        if "h" in self.params:
            self.h = _field("params/h", lambda: ScalarField(self.params["h"]))

    @property
    def u(self):
        """``u`` as an intrinsic graph over ``(x, t)``."""
        if self._u is None:
            self._u = _field("u", lambda: ExprGraph(self.u_field.expr, self.domain))
        return self._u

    @property
    def smooth_u(self):
        """``u`` with C^2 interpolation when it comes from a grid."""
        return self.u if self.grid is None else self.grid.as_graph("cubic")

    def seeds(self):
        seeds = self.params.get("seeds")
        if seeds is None:
            d = self.domain
            seeds = [[d.x0 + 0.25 * (d.x1 - d.x0), d.t0 + 0.5 * (d.t1 - d.t0)]]
        for a, b in seeds:
            if not self.domain.contains(a, b):
                raise ConfigError(f"config field 'params/seeds': ({a}, {b}) outside the domain")
        return [tuple(map(float, s)) for s in seeds]

    def test_functions(self):
        tests = self.params.get("tests")
        d = self.domain
        if tests is None:
            wx, wt = 0.3 * (d.x1 - d.x0), 0.3 * (d.t1 - d.t0)
            tests = [
                [d.x0 + p * (d.x1 - d.x0), d.t0 + q * (d.t1 - d.t0), wx, wt]
                for p in (0.35, 0.65)
                for q in (0.35, 0.65)
            ]
        return [BumpFunction(*t) for t in tests]


def _field(name, build):
    try:
        return build()
    except ParseError as exc:
        raise ConfigError(f"config field '{name}': {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"config field '{name}': {exc}") from exc


def load_config(path: str) -> tuple[dict, str]:
    """Parsed config and its SHA-256 (over the canonical JSON encoding)."""
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"unreadable config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return config, hashlib.sha256(canonical.encode()).hexdigest()


# ---------------------------------------------------------------------------
# commands; each returns (values, residuals, status) and writes its CSV files


def cmd_area(p: Problem, out: str):
    value = area(p.u, p.metric, p.domain, p.quad)
    write_table(os.path.join(out, "area.csv"), ["quantity", "value"], [["area", value], ["domain_area", p.domain.area]])
    return {"value": value, "domain_area": p.domain.area}, {}, True


def cmd_variation(p: Problem, out: str):
    h = p.params.get("fd_step", 1e-4)
    rows, worst_rel, worst_abs, values = [], 0.0, 0.0, []
    smooth = getattr(p.u, "smooth", True)
    for k, v in enumerate(p.test_functions()):
        fv = first_variation(p.u, v, p.f, p.metric, p.domain, p.quad)
        oracle = fd_variation_oracle(p.u, v, p.f, p.metric, p.domain, p.quad, h)
        geo = geometric_first_variation(p.u, v, p.f, p.metric, p.domain, p.quad) if smooth else math.nan
        rep = VariationReport.build(fv, oracle)
        rows.append([k, v.cx, v.ct, v.wx, v.wt, fv, oracle, geo, rep.abs_gap, rep.rel_gap])
        worst_rel, worst_abs = max(worst_rel, rep.rel_gap), max(worst_abs, rep.abs_gap)
        values.append(fv)
    cols = ["test", "cx", "ct", "wx", "wt", "first_variation", "fd_oracle", "geometric", "abs_gap", "rel_gap"]
    write_table(os.path.join(out, "variation.csv"), cols, rows)
    value = max(values, key=abs)
    return {"value": value, "first_variations": values}, {"max_rel_gap": worst_rel, "max_abs_gap": worst_abs}, True


def cmd_foliate(p: Problem, out: str):
    a, b = p.params.get("seed", p.seeds()[0])
    eps = p.params.get("eps", [-0.02, -0.01, 0.0, 0.01, 0.02])
    step = p.params.get("step", 1e-3)
    s_range = p.params.get("s_range", [p.domain.x0, p.domain.x1])
    fam = foliate_family(p.u, a, b, eps, tuple(s_range), step, p.domain)
    rows = []
    for k, (e, curve) in enumerate(zip(fam.eps, fam.curves)):
        H = mean_curvature_along(p.smooth_u, p.metric, curve, p.params.get("window"))
        i0 = int(round((fam.s[0] - curve.s[0]) / curve.step))
        for i, d in enumerate(fam.dt_deps[k]):
            j = i0 + i
            rows.append([e, curve.s[j], curve.s[j], curve.t[j], *curve.lifted[j], H[j], d])
    cols = ["eps", "s", "x", "t_param", "x_emb", "y_emb", "t_emb", "H", "dt_deps"]
    write_table(os.path.join(out, "foliate.csv"), cols, rows)
    horiz = max(horizontality_residual(c, p.u) for c in fam.curves)
    values = {
        "min_gap": fam.min_gap(),
        "min_dt_deps": float(fam.dt_deps.min()),
        "window": [float(fam.s[0]), float(fam.s[-1])],
        "complete": [c.complete for c in fam.curves],
    }
    return values, {"horizontality": horiz}, True


def cmd_geodesic(p: Problem, out: str):
    start = ChartPoint(*p.params.get("start", [0.0, 0.0, 0.0]))
    h = p.h if "h" in p.params else 0.0
    geo = integrate_geodesic(
        p.metric, start, p.params.get("theta0", 0.0), h, p.params.get("length", 1.0), p.params.get("step", 1e-3)
    )
    res = geodesic_residual(geo, p.metric)
    # the residual needs both neighbours, so the end samples carry nan
    padded = np.concatenate([[math.nan], res, [math.nan]])
    rows = list(zip(geo.s, geo.x, geo.y, geo.t, geo.theta, geo.h, padded))
    write_table(os.path.join(out, "geodesic.csv"), ["s", "x", "y", "t", "theta", "h", "residual"], rows)
    end = [float(geo.x[-1]), float(geo.y[-1]), float(geo.t[-1])]
    return {"end": end, "length": float(geo.s[-1])}, {"geodesic_residual": float(res.max())}, True


def _seed_curves(p: Problem, u):
    step = p.params.get("step", 1e-3)
    s_range = tuple(p.params.get("s_range", [p.domain.x0, p.domain.x1]))
    window = p.params.get("window")

    def one(seed):
        curve = integrate_characteristic(u, seed[0], seed[1], s_range, step, p.domain)
        return curve, mean_curvature_along(u, p.metric, curve, window)

    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        return list(pool.map(one, p.seeds()))


def _f_along(p: Problem, lifted):
    return np.broadcast_to(p.f.evaluate({"x": lifted[:, 0], "y": lifted[:, 1], "t": lifted[:, 2], "s": 0.0}), (len(lifted),))


def cmd_curvature(p: Problem, out: str):
    u = p.smooth_u
    rows, gaps = [], []
    for k, (curve, H) in enumerate(_seed_curves(p, u)):
        fv = _f_along(p, curve.lifted)
        gaps.append(float(np.max(np.abs(H - fv))))
        for i in range(len(curve)):
            rows.append([k, curve.s[i], curve.t[i], *curve.lifted[i], H[i], fv[i]])
    write_table(os.path.join(out, "curvature.csv"), ["seed", "s", "tau", "x", "y", "t", "H", "f"], rows)
    return {"seeds": p.seeds()}, {"max_abs_H_minus_f": gaps}, True


def _history_rows(report):
    rows = []
    for k, stage in enumerate(report.stages):
        eps = math.nan if stage.eps is None else stage.eps
        rows.extend([k, i, eps, e] for i, e in enumerate(stage.energies))
    return rows


def _solve_summary(report):
    return (
        {
            "iterations": report.iterations,
            "converged": report.converged,
            "stop_reason": report.message,
            "final_energy": float(report.energy_history[-1]),
            "eps_schedule": report.eps_schedule,
        },
        {"el_residual": report.residual, "energy_monotone": report.monotone()},
    )


def _initial_grid(p: Problem, axes):
    shape = p.params.get("shape", [33, 33])
    if p.grid is not None:
        field = GridField(p.grid.values, p.grid.bounds, axes)
    else:
        def fn(X, Y):
            # the unused chart coordinate is set to zero
            return p.u_field.evaluate({"x": X, axes[1]: Y, "t" if axes[1] == "y" else "y": 0.0, "s": 0.0})

        d = p.domain
        field = GridField.from_function(fn, (d.x0, d.x1, d.t0, d.t1), shape, axes)
    interior = p.params.get("interior", 0.0)
    if interior is not None:
        field.values[1:-1, 1:-1] = interior
    return field


def cmd_minimize_intrinsic(p: Problem, out: str):
    field = _initial_grid(p, ("x", "t"))
    kwargs = {k: p.params[k] for k in ("steps", "gtol", "rtol") if k in p.params}
    result, report = minimize_intrinsic(field, p.metric, p.f, **kwargs)
    write_grid(os.path.join(out, "minimize-intrinsic.csv"), result)
    write_table(os.path.join(out, "minimize-intrinsic_history.csv"), ["stage", "iteration", "eps", "energy"], _history_rows(report))
    values, residuals = _solve_summary(report)
    return values, residuals, report.converged


def cmd_minimize_tgraph(p: Problem, out: str):
    field = _initial_grid(p, ("x", "y"))
    kwargs = {k: p.params[k] for k in ("steps", "gtol", "rtol", "eps_schedule") if k in p.params}
    if "t" in p.f.expr.variables():
        raise ConfigError("config field 'f': the t-graph functional needs f independent of t")
    result, report = minimize_tgraph(field, p.f, **kwargs)
    write_grid(os.path.join(out, "minimize-tgraph.csv"), result)
    write_table(os.path.join(out, "minimize-tgraph_history.csv"), ["stage", "iteration", "eps", "energy"], _history_rows(report))
    values, residuals = _solve_summary(report)
    return values, residuals, report.converged


def cmd_check(p: Problem, out: str):
    """Formula-vs-oracle, characteristic-vs-geodesic, H = f and nabla T = 0 on the configured problem."""
    tol = p.tolerances
    checks = []

    worst = 0.0
    ok = True
    for v in p.test_functions():
        rep = VariationReport.build(
            first_variation(p.u, v, p.f, p.metric, p.domain, p.quad),
            fd_variation_oracle(p.u, v, p.f, p.metric, p.domain, p.quad, p.params.get("fd_step", 1e-4)),
        )
        worst = max(worst, rep.rel_gap if rep.abs_gap > tol["variation_abs"] else 0.0)
        ok = ok and rep.within(tol["variation_abs"], tol["variation_rel"])
    checks.append(("first_variation_vs_oracle", worst, tol["variation_rel"], ok))

    u = p.smooth_u
    step = p.params.get("step", 1e-3)
    length = p.params.get("length", 1.0)
    dist = max(
        compare_with_characteristic(u, p.metric, None, q, length, step, p.params.get("window")).sup_distance
        for q in p.seeds()
    )
    checks.append(("characteristic_vs_geodesic", dist, tol["geodesic"], dist <= tol["geodesic"]))

    gap = 0.0
    for curve, H in _seed_curves(p, u):
        gap = max(gap, float(np.max(np.abs(H - _f_along(p, curve.lifted)))))
    checks.append(("H_equals_f", gap, tol["curvature"], gap <= tol["curvature"]))

    nt = max(nabla_t_residual(p.metric, embed_point(u, a, b, p.domain)) for a, b in p.seeds())
    checks.append(("nabla_T_zero", nt, tol["nabla_t"], nt <= tol["nabla_t"]))

    write_table(
        os.path.join(out, "check.csv"),
        ["check", "value", "tolerance", "passed"],
        [[name, value, t, "true" if passed else "false"] for name, value, t, passed in checks],
    )
    width = max(len(c[0]) for c in checks)
    print(f"{'check':<{width}}  {'value':>12}  {'tolerance':>10}  result")
    for name, value, t, passed in checks:
        print(f"{name:<{width}}  {value:12.3e}  {t:10.1e}  {'PASS' if passed else 'FAIL'}")
    passed = all(c[3] for c in checks)
    return {c[0]: c[1] for c in checks}, {c[0]: bool(c[3]) for c in checks}, passed


HANDLERS = {
    "area": cmd_area,
    "variation": cmd_variation,
    "foliate": cmd_foliate,
    "geodesic": cmd_geodesic,
    "curvature": cmd_curvature,
    "minimize-intrinsic": cmd_minimize_intrinsic,
    "minimize-tgraph": cmd_minimize_tgraph,
    "check": cmd_check,
}


# ---------------------------------------------------------------------------
# driver


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _write_report(out, command, config, digest, status, values, residuals, started, error=None):
    report = {
        "tool": "srmc",
        "version": __version__,
        "backend": kernels.BACKEND,
        "command": command,
        "config_sha256": digest,
        "inputs": config,
        "status": status,
        "values": values,
        "residuals": residuals,
        "runtime_seconds": time.perf_counter() - started,
    }
    if error:
        report["error"] = error
    with open(os.path.join(out, f"{command}.json"), "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(command: str, config_path: str, out: str) -> int:
    """Execute one command; returns the process exit code."""
    started = time.perf_counter()
    if command not in HANDLERS:
        print(f"error: unknown command {command!r}", file=sys.stderr)
        return EXIT_INVALID
    try:
        config, digest = load_config(config_path)
        problem = Problem(config, os.path.dirname(os.path.abspath(config_path)))
        os.makedirs(out, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        values, residuals, ok = HANDLERS[command](problem, out)
    except (MetricError, FieldDomainError, ArithmeticError, NumericalFailure, np.linalg.LinAlgError) as exc:
        # MetricError is a ValueError, so this clause must come first
        print(f"numerical failure: {exc}", file=sys.stderr)
        _write_report(out, command, config, digest, "numerical-failure", {}, {}, started, str(exc))
        return EXIT_NUMERICAL
    except (ConfigError, DomainError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_report(out, command, config, digest, "invalid", {}, {}, started, str(exc))
        return EXIT_INVALID
    status = "ok" if ok else "failed"
    _write_report(out, command, config, digest, status, values, residuals, started)
    if not ok:
        print(f"{command}: did not meet its convergence or check criteria", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srmc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"srmc {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)  # argparse exits with 2 on bad usage
    return run(args.command, args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
