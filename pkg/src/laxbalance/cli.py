"""Command-line front end: solve, tables, traces, triangles, checks and oracle runs."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import characteristics as ch
from . import oracle as fv
from .boundary import bln_check, build_table, classify
from .config import CHECK_NAMES, ConfigError, RunConfig, load, with_overrides
from .flux import FluxError
from .functional import BRANCH_NAMES, InfeasibleError, dpp_residual
from .hcurve import HCurveError, curve_min, solve_h
from .solver import boundary_trace, random_bumps, solve_grid, weak_residual
from .source import HorizonError, QuadratureError

FORMAT_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3
NUMERIC_ERRORS = (InfeasibleError, HCurveError, QuadratureError, HorizonError, FluxError,
                  ArithmeticError, RuntimeError, FloatingPointError)


class CheckFailed(Exception):
    pass


# output helpers
def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.17g}"
    return str(v)


def write_csv(path: Path, kind: str, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# laxbalance {kind} v{FORMAT_VERSION}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else v
    return obj


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def write_field(out: Path, field, name: str = "field") -> None:
    rows = []
    for j, t in enumerate(field.ts):
        for i, x in enumerate(field.xs):
            b = int(field.branch[j, i])
            rows.append((x, t, field.u[j, i], field.W[j, i], BRANCH_NAMES.get(b, "") if b >= 0 else "",
                         field.y_lo[j, i], field.y_hi[j, i], field.tau_lo[j, i], field.tau_hi[j, i]))
    write_csv(out / f"{name}.csv", "field", ("x", "t", "u", "W", "branch", "y_lo", "y_hi", "tau_lo", "tau_hi"), rows)
    write_csv(out / f"{name}_jumps.csv", "jumps", ("t", "x_jump", "u_left", "u_right"),
              [(jp.t, jp.x_jump, jp.u_left, jp.u_right) for jp in field.jumps])


def write_table(out: Path, table) -> None:
    write_csv(out / "boundary_table.csv", "boundary-table", ("t", "W", "mechanism", "from_index"), table.rows())


# shared pipeline pieces
def _time(cfg: RunConfig, problem) -> float:
    return problem.t_max if cfg.grids.t is None else float(cfg.grids.t)


def _xs(cfg: RunConfig, problem, cells: int | None = None) -> np.ndarray:
    n = cells or cfg.grids.cells
    return (np.arange(n) + 0.5) * problem.x_max / n


def _ts(cfg: RunConfig, problem, levels: int | None = None) -> np.ndarray:
    t = _time(cfg, problem)
    n = levels or cfg.grids.levels
    return np.array([t]) if n == 1 else np.linspace(t / n, t, n)


def _probe(spec: str, problem) -> dict:
    try:
        a, b = spec.split(":")
        p1 = tuple(float(v) for v in a.split(","))
        p2 = tuple(float(v) for v in b.split(","))
        if len(p1) != 2 or len(p2) != 2:
            raise ValueError
    except ValueError as exc:
        raise ConfigError(f"--probe-hcurve expects X1,T1:X2,T2, got {spec!r}") from exc
    (x_hi, t_hi), (x_lo, t_lo) = sorted([p1, p2], key=lambda p: p[1], reverse=True)
    curve = solve_h(x_hi, t_hi, x_lo, t_lo, problem.flux, problem.source, problem.kernel)
    theta, x_min = curve_min(curve, problem.tol.adm_samples)
    floor = -problem.tol.eps_adm * (1.0 + abs(x_hi))
    return {"from": [x_lo, t_lo], "to": [x_hi, t_hi], "y0": curve.y0, "x_min": x_min, "theta_min": theta,
            "admissible": bool(x_min >= floor)}


# subcommands
def cmd_solve(cfg, problem, args, report):
    table = build_table(problem, cfg.grids.table_n)
    write_table(Path(cfg.out), table)
    field = solve_grid(problem, _xs(cfg, problem), _ts(cfg, problem), table)
    write_field(Path(cfg.out), field)
    report["field"] = {"points": int(field.u.size), "jumps": len(field.jumps), "failures": field.failures}
    report["jumps"] = [{"t": jp.t, "x_jump": jp.x_jump, "u_left": jp.u_left, "u_right": jp.u_right} for jp in field.jumps]
    if field.failures:
        raise InfeasibleError(f"{len(field.failures)} level(s) failed to solve")


def cmd_boundary_table(cfg, problem, args, report):
    table = build_table(problem, cfg.grids.table_n)
    write_table(Path(cfg.out), table)
    t = _time(cfg, problem)
    k = int(round(t / table.h_b))
    report["table"] = {"nodes": int(table.grid.size), "W_end": float(table.values[k]),
                       "type_at_t": classify(table, float(table.grid[k]))}


def cmd_trace(cfg, problem, args, report):
    table = build_table(problem, cfg.grids.table_n)
    tp = cfg.trace
    t1 = _time(cfg, problem) if tp.t1 is None else tp.t1
    curve = ch.trace(tp.x0, tp.t0, t1, tp.dt, problem, table, tp.method)
    write_csv(Path(cfg.out) / "trace.csv", "trace", ("t", "x", "speed"), zip(curve.ts, curve.xs, curve.speeds))
    report["trace"] = {"origin": list(curve.origin), "notes": curve.notes, "complete": curve.complete,
                       "x_end": float(curve.xs[-1])}
    if not curve.complete:
        raise HCurveError("trace stopped early: " + "; ".join(curve.notes))


def cmd_triangles(cfg, problem, args, report):
    table = build_table(problem, cfg.grids.table_n)
    t0 = _time(cfg, problem)
    xs = np.linspace(0.0, problem.x_max, cfg.grids.cells + 1)
    rep = ch.check_triangle_lemma(problem, table, t0, xs)
    rows = []
    for tri in ch.triangles_at_level(problem, table, xs, t0):
        th, lo, hi = tri.polylines(problem)
        rows.extend((tri.apex_x, tri.apex_t, tri.case, a, b, c) for a, b, c in zip(th, lo, hi))
    write_csv(Path(cfg.out) / "triangles.csv", "triangles", ("apex_x", "apex_t", "case", "theta", "left", "right"), rows)
    report["triangles"] = rep.as_dict()
    if not rep.passed:
        raise CheckFailed("triangle lemma")


def run_checks(cfg, problem, names, report) -> bool:
    rng = np.random.default_rng(cfg.seed)
    table = build_table(problem, cfg.grids.table_n)
    t = _time(cfg, problem)
    results = {}
    if "bln" in names:
        times = np.sort(rng.uniform(0.05 * t, t, cfg.checks.samples))
        verdicts = [bln_check(boundary_trace(problem, table, float(s)), float(s), problem).as_dict() for s in times]
        results["bln"] = {"verdict": "pass" if all(v["verdict"] == "pass" for v in verdicts) else "fail",
                          "points": verdicts}
    if "entropy" in names:
        field = solve_grid(problem, _xs(cfg, problem), _ts(cfg, problem, max(cfg.grids.levels, 8)), table)
        bad = ch.entropy_check(field, problem)
        results["entropy"] = {"verdict": "fail" if bad else "pass", "jumps": len(field.jumps), "violations": bad}
    if "monotone" in names or "nip" in names:
        xs = np.linspace(0.0, problem.x_max, 64)
        ts = np.linspace(0.0, t, 17)[1:]
        levels = ch._levels(problem, table, xs, ts)
        if "monotone" in names:
            results["monotone"] = ch.monotonicity_check(problem, table, xs, ts, levels).as_dict()
        if "nip" in names:
            results["nip"] = ch.non_intersection_check(problem, table, xs, ts, levels).as_dict()
    if "dpp" in names:
        res = []
        limit = 2.0 * problem.tol.val_tol
        for _ in range(cfg.checks.samples):
            tt = float(rng.uniform(0.1 * t, t))
            ss = float(rng.uniform(0.05, 0.95) * tt)
            xx = float(rng.uniform(0.0, problem.x_max))
            r = dpp_residual(xx, tt, ss, problem, table)
            res.append({"x": xx, "t": tt, "s": ss, "residual": r})
        worst = max(r["residual"] for r in res)
        results["dpp"] = {"verdict": "pass" if worst <= limit else "fail", "limit": limit,
                          "max_residual": worst, "points": res}
    if "weak" in names:
        n = cfg.grids.cells
        xs = np.linspace(0.0, problem.x_max, n + 1)
        ts = np.linspace(0.0, t, n + 1)[1:]
        field = solve_grid(problem, xs, ts, table)
        bumps = random_bumps(rng, cfg.checks.bumps, (0.0, problem.x_max), (0.0, t))
        r = weak_residual(field, problem, bumps)
        results["weak"] = {"verdict": "pass" if r <= 5e-3 else "fail", "residual": r, "limit": 5e-3, "grid": [n, n]}
    report["checks"] = results
    return all(v["verdict"] == "pass" for v in results.values())


def cmd_check(cfg, problem, args, report):
    names = list(cfg.checks.names)
    if not run_checks(cfg, problem, names, report):
        raise CheckFailed(", ".join(k for k, v in report["checks"].items() if v["verdict"] != "pass"))


def cmd_oracle(cfg, problem, args, report):
    field = fv.run(problem, fv.FVConfig(cells=cfg.grids.oracle_cells, output_times=tuple(_ts(cfg, problem))))
    write_field(Path(cfg.out), field, "oracle")
    report["oracle"] = {"cells": cfg.grids.oracle_cells, "times": field.ts}


def cmd_compare(cfg, problem, args, report):
    ts = tuple(_ts(cfg, problem))
    ref = fv.run(problem, fv.FVConfig(cells=cfg.grids.oracle_cells, output_times=ts))
    table = build_table(problem, cfg.grids.table_n)
    var = solve_grid(problem, ref.xs, np.array(ts), table)
    write_field(Path(cfg.out), var)
    write_field(Path(cfg.out), ref, "oracle")
    report["compare"] = {"l1": fv.l1_distance(var, ref), "l1_relative": fv.l1_distance(var, ref, relative=True),
                         "cells": cfg.grids.oracle_cells, "times": ts}


COMMANDS = {
    "solve": cmd_solve,
    "boundary-table": cmd_boundary_table,
    "trace": cmd_trace,
    "triangles": cmd_triangles,
    "check": cmd_check,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="laxbalance", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("names", nargs="?", help="checks to run for 'check' (comma separated)")
    p.add_argument("--config", help="TOML or JSON run configuration")
    p.add_argument("--preset", help="named problem")
    p.add_argument("--out", help="output directory")
    p.add_argument("--t", type=float, help="output time")
    p.add_argument("--x-max", type=float, help="spatial window")
    p.add_argument("--cells", type=int, help="field cells (and apex count for triangles)")
    p.add_argument("--table-n", type=int, help="boundary table steps")
    p.add_argument("--check", help=f"comma separated subset of {','.join(CHECK_NAMES)}")
    p.add_argument("--probe-hcurve", help="report the h-curve joining X1,T1 and X2,T2")
    p.add_argument("--seed", type=int)
    return p


def _parse_names(text):
    return [s.strip() for s in text.split(",") if s.strip()] if text else None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    report = {"command": args.command, "format_version": FORMAT_VERSION}
    out = Path(args.out or "out")
    code = EXIT_OK
    try:
        checks = _parse_names(args.check) or _parse_names(args.names)
        if args.config:
            cfg = load(args.config)
        elif args.preset:
            cfg = RunConfig(preset=args.preset)
        else:
            raise ConfigError("need --config or --preset")
        cfg = with_overrides(cfg, preset=args.preset if args.config else None, out=args.out, x_max=args.x_max,
                             t=args.t, cells=args.cells, table_n=args.table_n, checks=checks, seed=args.seed)
        out = Path(cfg.out)
        report["config"] = cfg.as_dict()
        problem = cfg.build_problem()
        t = _time(cfg, problem)
        if not 0 < t <= problem.t_max * (1 + 1e-12):
            raise ConfigError(f"--t must lie in (0, {problem.t_max:g}]")
        if args.probe_hcurve:
            report["probe_hcurve"] = _probe(args.probe_hcurve, problem)
        COMMANDS[args.command](cfg, problem, args, report)
        report["status"] = "ok"
    except ConfigError as exc:
        code, report["status"], report["error"] = EXIT_CONFIG, "config-error", str(exc)
    except CheckFailed as exc:
        code, report["status"], report["error"] = EXIT_CHECK, "check-failed", str(exc)
    except NUMERIC_ERRORS as exc:
        code, report["status"], report["error"] = EXIT_NUMERIC, "numerical-error", f"{type(exc).__name__}: {exc}"
    except ValueError as exc:
        code, report["status"], report["error"] = EXIT_CONFIG, "config-error", str(exc)
    report["exit_code"] = code
    write_json(out / "report.json", report)
    if code:
        print(f"laxbalance {args.command}: {report['status']}: {report.get('error', '')}", file=sys.stderr)
    else:
        print(f"laxbalance {args.command}: ok ({out / 'report.json'})")
    return code


if __name__ == "__main__":
    sys.exit(main())
