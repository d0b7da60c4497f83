"""Command-line entry point.

Exit codes: 0 success, 1 numerical failure (non-convergence, failed check),
2 usage or configuration error.  Verbosity comes from ACTIONFORGE_LOG
(e.g. ``ACTIONFORGE_LOG=DEBUG``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, build_potential, load_config, set_path, solve_config, validate_config
from .potential import (
    SampleGrid,
    check_A,
    check_F1,
    check_F3,
    check_F4,
    check_F5_F6,
    check_lattice_integral,
    threshold_report,
)
from .solvers import NonFiniteActionError, check_saddle_geometry, minimize_direct, saddle_search, sign_property
from .verify import ode_residual, property_suite

log = logging.getLogger("actionforge")

DEFAULT_RESIDUAL_BOUND = 1e-8


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, allow_nan=True) + "\n")


def _write_meta(out: Path, command: str, argv) -> None:
    _dump(out / "meta.json", {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    })


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _residual_bound(cfg) -> float:
    return cfg.get("verify", {}).get("residual_bound", DEFAULT_RESIDUAL_BOUND)


def _dense_K(cfg):
    return cfg.get("verify", {}).get("dense_K")


def _threshold_b(cfg):
    return cfg.get("saddle", {}).get("b", cfg.get("check", {}).get("b"))


# solve ------------------------------------------------------------------------


def run_solve(cfg: dict, method: str, seed: int | None = None) -> dict:
    """Solve one validated problem; returns the result/verify payloads."""
    p = build_potential(cfg)
    scfg = solve_config(cfg, seed)
    payload = {}
    if method == "saddle":
        R = cfg.get("saddle", {}).get("R", 5.0)
        b = _threshold_b(cfg)
        geometry = check_saddle_geometry(p, R, scfg, b)
        result = saddle_search(p, scfg, R)
        payload["geometry"] = geometry.to_dict()
        if b is not None:
            payload["sign_property"] = sign_property(result, p, b)
    else:
        result = minimize_direct(None, p, cfg=scfg)
    report = ode_residual(result.trajectory, p, _dense_K(cfg))
    bound = _residual_bound(cfg)
    ok = result.converged and report.residual_sup <= bound
    body = result.to_dict()
    body.update(payload)
    body["nonconstancy"] = report.nonconstancy
    body["problem"] = cfg
    return {
        "result": result,
        "report": report,
        "body": body,
        "verify": {**report.to_dict(), "residual_bound": bound, "passed": bool(report.residual_sup <= bound)},
        "ok": bool(ok),
    }


def cmd_solve(args, method: str) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out)
    try:
        run = run_solve(cfg, method, args.seed)
    except NonFiniteActionError as exc:
        _dump(out / "result.json", {"status": "non_finite", "message": str(exc),
                                    "trajectory": exc.iterate.to_dict(), "problem": cfg})
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = run["result"]
    _dump(out / "result.json", run["body"])
    _dump(out / "verify.json", run["verify"])
    (out / "trajectory.csv").write_text(result.trajectory.to_csv())
    (out / "trace.csv").write_text(result.trace_csv())
    _write_meta(out, f"solve-{method}", sys.argv)
    rep = run["report"]
    print(f"{result.method}: {result.status} after {result.iterations} iterations; "
          f"f = {result.f_value:.12g}, |grad| = {result.grad_norm:.3e}, residual = {rep.residual_sup:.3e}")
    if method == "saddle":
        print("solution is " + ("non-constant" if result.nonconstant else "constant"))
    if not result.converged:
        print(result.message, file=sys.stderr)
    return 0 if run["ok"] else 1


# check --------------------------------------------------------------------------


def run_check(cfg: dict) -> list:
    """Hypothesis rows as dicts; rows lacking constants are marked not checked."""
    p = build_potential(cfg)
    c = cfg.get("check", {})
    xr = c.get("x_range", 10.0)
    grid = SampleGrid.default(p, nt=c.get("nt", 64), nx=c.get("nx", 41), x_lo=-xr, x_hi=xr)
    rows = []

    def add(name, rep=None, reason=""):
        if rep is None:
            rows.append({"condition": name, "status": "not checked", "reason": reason})
        else:
            d = rep.to_dict()
            d["condition"] = name
            d["status"] = "pass" if rep.passed else "FAIL"
            rows.append(d)

    add("A", check_A(p, grid))
    add("F1", check_F1(p, grid))
    if p.lattice is not None and p.lattice.has_period:
        add("lattice_integral", check_lattice_integral(p, p.lattice, grid.x))
    else:
        add("lattice_integral", reason="no lattice")
    if "C1" in c and "C2" in c:
        add("F3", check_F3(p, c["C1"], c["C2"], grid))
    else:
        add("F3", reason="C1/C2 not given")
    if "mu1" in c and "mu2" in c:
        if c["mu1"] >= 2:
            raise ConfigError("check.mu1 must be < 2")
        add("F4", check_F4(p, c["mu1"], c["mu2"], grid))
    else:
        add("F4", reason="mu1/mu2 not given")
    if all(k in c for k in ("delta", "R", "b")):
        reps = check_F5_F6(p, c["delta"], c["R"], c["b"], grid)
        add("F5", reps["F5"])
        add("F6", reps["F6"])
        add("T_threshold", reps["T_threshold"])
    else:
        add("F5", reason="delta/R/b not given")
        if "b" in c:
            reps = check_F5_F6(p, 1.0, 1.0, c["b"], grid)
            add("F6", reps["F6"])
            add("T_threshold", threshold_report(p.period_T, c["b"]))
        else:
            add("F6", reason="b not given")
            add("T_threshold", reason="b not given")
    return rows


def _format_rows(rows) -> str:
    lines = [f"{'condition':<17} {'status':<12} {'worst_violation':>16} {'magnitude':>14}  witness"]
    for r in rows:
        if r["status"] == "not checked":
            lines.append(f"{r['condition']:<17} {'not checked':<12} {'':>16} {'':>14}  ({r['reason']})")
            continue
        w = r["witness"]
        wtxt = "" if w is None else f"t={w['t']:.4g}, x={[round(v, 4) for v in w['x']]}"
        lines.append(f"{r['condition']:<17} {r['status']:<12} {r['worst_violation']:>16.6g} "
                     f"{r['magnitude']:>14.6g}  {wtxt}")
    return "\n".join(lines)


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    rows = run_check(cfg)
    print(_format_rows(rows))
    if args.out:
        out = _out_dir(args.out)
        _dump(out / "check.json", rows)
        _write_meta(out, "check", sys.argv)
    failed = [r for r in rows if r["status"] == "FAIL"]
    return 1 if failed else 0


# sweep ------------------------------------------------------------------------------


def _parse_values(text: str) -> list:
    text = text.strip()
    if not text:
        return []
    if text.startswith("["):
        vals = json.loads(text)
    elif ":" in text:
        a, b, n = text.split(":")
        vals = np.linspace(float(a), float(b), int(n)).tolist()
    else:
        vals = [float(v) for v in text.split(",") if v.strip()]
    return [float(v) for v in vals]


def _sweep_point(job):
    cfg, param, value, method, seed = job
    point = validate_config(set_path(cfg, param, value))
    row = {"value": value}
    b = _threshold_b(point)
    if b is not None:
        row["threshold_ok"] = threshold_report(float(point["T"]), b).passed
    try:
        run = run_solve(point, method, seed)
    except NonFiniteActionError as exc:
        row.update({"converged": False, "status": "non_finite", "message": str(exc)})
        return row
    res, rep = run["result"], run["report"]
    row.update({
        "converged": bool(res.converged),
        "status": res.status,
        "f_value": res.f_value,
        "grad_norm": res.grad_norm,
        "nonconstancy": rep.nonconstancy,
        "sup_norm": res.trajectory.sup_norm(),
        "residual_sup": rep.residual_sup,
        "ok": run["ok"],
    })
    return row


def run_sweep(cfg: dict, param: str, values, seed=None, workers: int = 1) -> list:
    method = cfg.get("sweep", {}).get("solver", "min")
    jobs = [(cfg, param, v, method, seed) for v in values]
    # validate every point up front so config errors surface as usage errors
    for job in jobs:
        validate_config(set_path(cfg, param, job[2]))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(job) for job in jobs]


_SWEEP_COLUMNS = ["value", "threshold_ok", "converged", "status", "f_value", "grad_norm", "nonconstancy",
                  "sup_norm", "residual_sup"]


def _sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=_SWEEP_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in _SWEEP_COLUMNS})
    return buf.getvalue()


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    try:
        values = _parse_values(args.values)
    except ValueError as exc:
        raise ConfigError(f"cannot parse --values: {exc}") from exc
    if not values:
        raise ConfigError("--values is empty")
    rows = run_sweep(cfg, args.param, values, args.seed, args.workers)
    out = _out_dir(args.out)
    (out / "sweep.csv").write_text(_sweep_csv(rows))
    _dump(out / "sweep.json", {"param": args.param, "rows": rows})
    _write_meta(out, "sweep", sys.argv)
    print(_sweep_csv(rows), end="")
    return 0 if all(r.get("ok") for r in rows) else 1


# suite ----------------------------------------------------------------------------


def cmd_suite(args) -> int:
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    report = property_suite(args.trials, args.seed if args.seed is not None else 0)
    for name, c in report.checks.items():
        print(f"{name:<26} {'pass' if c.passed else 'FAIL':<5} trials={c.trials:<5} worst margin={c.worst:.3e}")
    if args.out:
        out = _out_dir(args.out)
        _dump(out / "suite.json", report.to_dict())
        _write_meta(out, "suite", sys.argv)
    return 0 if report.passed else 1


# entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="actionforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, out_required):
        sp.add_argument("--config", required=True, help="problem config (JSON)")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override solver.seed")

    sp = sub.add_parser("solve-min", help="direct minimization of the action")
    common(sp, True)
    sp = sub.add_parser("solve-saddle", help="saddle search between constants and zero-mean curves")
    common(sp, True)
    sp = sub.add_parser("check", help="audit the hypotheses on sampled grids")
    common(sp, False)
    sp = sub.add_parser("sweep", help="solve over a list of parameter values")
    common(sp, True)
    sp.add_argument("--param", required=True, help="dotted config path, e.g. T or potential.forcing.cos.0")
    sp.add_argument("--values", required=True, help="comma list, JSON list or start:stop:count")
    sp.add_argument("--workers", type=int, default=1)
    sp = sub.add_parser("suite", help="randomized inequality and consistency suite")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    return parser


def _setup_logging():
    level = os.environ.get("ACTIONFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    handlers = {
        "solve-min": lambda a: cmd_solve(a, "min"),
        "solve-saddle": lambda a: cmd_solve(a, "saddle"),
        "check": cmd_check,
        "sweep": cmd_sweep,
        "suite": cmd_suite,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
