"""Command line: ``peeldyn run|verify|batch|convergence``.

Exit codes: 0 success, 1 other solver failure or rejected candidate,
2 convergence failure, 3 non-existence diagnosis, 4 validation error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__
from ..duhamel import WaveField, solve_prescribed
from ..energy import EnergyTrace, energy_trace, sample_times
from ..errors import NonExistenceError, PeelError, ValidationError
from ..geometry import Front
from ..griffith import (GriffithReport, _kappa_tx, coupled_solve, griffith_residuals,
                        verify_solution_pair)
from ..kernels import BACKEND
from ..oracle import FdmGrid, compare_fields, fdm_solve_prescribed
from .output import write_csv, write_plot_script, write_report
from .scenario import Scenario, ScenarioError, front_from_csv, load_scenario

logger = logging.getLogger("peeldyn")

SCENARIO_DIR = Path(__file__).parent / "scenarios"


@dataclass
class Outcome:
    code: int
    report: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    field: Optional[WaveField] = None
    front: Optional[Front] = None
    trace: Optional[EnergyTrace] = None
    griffith: Optional[GriffithReport] = None


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------

def _front_columns(wf: WaveField, front: Front, kappa, times) -> tuple[dict, GriffithReport]:
    """``front.csv`` columns at the sample times plus the front's own knots."""
    knots = front.t[(front.t > 0) & (front.t < wf.t_end)]
    # knots that (nearly) coincide with a sample time would create micro-segments
    near = np.abs(times[np.clip(np.searchsorted(times, knots), 0, times.size - 1)] - knots)
    near = np.minimum(near, np.abs(times[np.clip(np.searchsorted(times, knots) - 1, 0, times.size - 1)] - knots))
    grid = np.union1d(times, knots[near > 1e-6 * wf.delta])
    rep = griffith_residuals(wf, front, kappa if kappa is not None else (lambda x: np.full_like(x, np.nan)), grid)
    cols = rep.columns()
    cols = {"t": cols["t"], "ell": cols["ell"], "ell_dot": cols["ell_dot"], "G0": cols["G0"],
            "G_ell_dot": cols["G_ell_dot"], "kappa": cols["kappa"]}
    return cols, rep


def _snapshot(wf: WaveField, t: float) -> dict:
    x, _ = wf.node_slice(t, left=True)
    tt = np.full(x.shape, t)
    u = wf.u(tt, x, left=True)
    ut, ux = wf.u_derivatives(tt, x, left=True)
    return {"x": x, "u": u, "u_t": ut, "u_x": ux}


def _solve(sc: Scenario) -> tuple[Outcome, dict]:
    data = sc.problem_data()
    kappa = sc.toughness_model()
    tol = sc.tolerances
    rep: dict = {"name": sc.name, "mode": sc.mode, "version": __version__, "kernel_backend": BACKEND,
                 "nu": sc.nu, "ell0": sc.ell0, "delta": sc.delta, "horizon": sc.horizon,
                 "diagnoses": [], "messages": []}
    if sc.mode == "coupled":
        eps = sc.toughness.get("eps")
        res = coupled_solve(data, kappa, sc.delta, sc.horizon, tol=tol["picard"], max_iter=tol["max_iter"],
                            eps=eps, delta_cap=tol["speed_cap"], safety=tol["safety"])
        wf, front, trace = res.field, res.front, res.trace
        rep["windows"] = [{k: v for k, v in w.items() if k != "increments"} | {"final_increment": w["increments"][-1]}
                          for w in res.report.window_log]
        rep["diagnoses"] = list(res.report.diagnoses)
        if res.alternatives:
            rep["alternatives"] = res.alternatives
        rep["termination"] = res.report.termination
    else:
        front = _candidate_front(sc)
        wf, srep = solve_prescribed(data, front, sc.delta, sc.horizon, tol=tol["picard"],
                                    max_iter=tol["max_iter"], safety=tol["safety"])
        trace = energy_trace(wf, data, _kappa_tx(kappa))
        rep["windows"] = srep.as_dict()["windows"]
        if srep.message:
            rep["messages"].append(srep.message)
    times = trace.times
    cols, grep = _front_columns(wf, wf.front if sc.mode == "coupled" else front, kappa, times)
    rep["t_end"] = wf.t_end
    rep["ell_end"] = float(cols["ell"][-1])
    rep["residuals"] = {"energy_balance_max": trace.max_residual(), "energy_scale": trace.scale}
    if kappa is not None:
        rep["residuals"]["griffith_violation_max"] = grep.max_violation
        rep["residuals"]["complementarity_max"] = grep.max_complementarity
        rep["kappa_min"] = float(np.nanmin(cols["kappa"]))
    return Outcome(code=0, report=rep, field=wf, front=front, trace=trace, griffith=grep), cols


def _candidate_front(sc: Scenario, path: Optional[Path] = None) -> Front:
    front = front_from_csv(path) if path is not None else sc.prescribed_front()
    if abs(front.ell0 - sc.ell0) > 1e-12 * sc.ell0:
        raise ScenarioError(f"front starts at {front.ell0:g} but ell0 = {sc.ell0:g}")
    need = sc.horizon + 2 * sc.delta
    return front.extended(need) if front.t_end < need else front


def run_scenario(sc: Scenario, front_path: Optional[Path] = None, verify_only: bool = False) -> Outcome:
    """Solve one scenario and write its artifacts; never raises for solver failures."""
    out = sc.out_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.scn").write_text(sc.as_text())
    t0 = time.perf_counter()
    rep: dict = {"name": sc.name, "mode": sc.mode}
    files: list[str] = []
    try:
        if verify_only or sc.mode == "verify":
            outcome = _verify(sc, front_path)
        elif sc.mode == "oracle":
            outcome = _oracle(sc)
        else:
            outcome, cols = _solve(sc)
            files += _write_artifacts(sc, outcome, cols)
    except NonExistenceError as exc:
        outcome = Outcome(code=exc.exit_code, report={**rep, "status": "non-existence",
                                                      "diagnoses": [exc.diagnosis], "message": str(exc),
                                                      "windows_attempted": exc.windows})
        print(f"{sc.name}: {exc.diagnosis}", file=sys.stderr)
        print(str(exc), file=sys.stderr)
    except PeelError as exc:
        outcome = Outcome(code=exc.exit_code, report={**rep, "status": type(exc).__name__, "message": str(exc)})
        print(f"{sc.name}: {type(exc).__name__}: {exc}", file=sys.stderr)
    files += outcome.files
    outcome.report.setdefault("status", "ok" if outcome.code == 0 else "failed")
    outcome.report["exit_code"] = outcome.code
    outcome.report["elapsed_s"] = round(time.perf_counter() - t0, 3)
    outcome.report["files"] = sorted(set(files))
    write_report(out / "report.json", outcome.report)
    if sc.output.get("plot") and files:
        write_plot_script(out, files)
    return outcome


def _write_artifacts(sc: Scenario, outcome: Outcome, cols: dict) -> list[str]:
    out = sc.out_dir
    files = []
    traces = sc.output["traces"]
    if "front" in traces:
        write_csv(out / "front.csv", cols)
        files.append("front.csv")
    if "energy" in traces:
        write_csv(out / "energy.csv", outcome.trace.columns())
        files.append("energy.csv")
    if "field" in traces:
        for t in sc.output.get("snapshots") or [outcome.field.t_end]:
            t = min(round(t / sc.delta) * sc.delta, outcome.field.t_end)
            name = f"field_t{t:.6g}.csv"
            write_csv(out / name, _snapshot(outcome.field, t))
            files.append(name)
    return files


def _verify(sc: Scenario, front_path: Optional[Path]) -> Outcome:
    kappa = sc.toughness_model()
    if kappa is None:
        raise ScenarioError("verification needs a [toughness] section")
    data = sc.problem_data()
    front = _candidate_front(sc, front_path)
    wf, _ = solve_prescribed(data, front, sc.delta, sc.horizon, tol=sc.tolerances["picard"],
                             max_iter=sc.tolerances["max_iter"], safety=sc.tolerances["safety"])
    vr = verify_solution_pair(wf, front, data, kappa, sc.delta, tol=sc.tolerances["verify"])
    print(f"{'residual':<12} {'value':>14} {'tol':>10}  ok")
    for k, v in vr.residuals.items():
        print(f"{k:<12} {v:>14.6e} {vr.tol:>10.1e}  {'yes' if v <= vr.tol else 'NO'}")
    print("accepted" if vr.accepted else "rejected")
    report = {"name": sc.name, "mode": "verify", "version": __version__, "candidate": str(front_path or "[front]"),
              "residuals": vr.residuals, "tol": vr.tol, "accepted": vr.accepted, "details": vr.details}
    return Outcome(code=0 if vr.accepted else 1, report=report, field=wf, front=front)


def _oracle(sc: Scenario) -> Outcome:
    data = sc.problem_data()
    front = _candidate_front(sc)
    times = sc.oracle.get("times") or [sc.horizon]
    wf, _ = solve_prescribed(data, front, sc.delta, sc.horizon, tol=sc.tolerances["picard"],
                             max_iter=sc.tolerances["max_iter"], safety=sc.tolerances["safety"])
    grid = FdmGrid(h=sc.oracle.get("h") or sc.delta, cfl=sc.oracle["cfl"])
    fdm = fdm_solve_prescribed(data, front, grid, sc.horizon, out_times=times)
    diffs = compare_fields(wf, fdm, times)
    out = sc.out_dir
    write_csv(out / "oracle.csv", {"t": [d.t for d in diffs], "l2": [d.l2 for d in diffs],
                                   "sup": [d.sup for d in diffs]})
    files = ["oracle.csv"]
    for t in times:
        x, uf = fdm.slice(t)
        us = wf.u(np.full(x.shape, t), x)
        name = f"field_t{t:.6g}.csv"
        write_csv(out / name, {"x": x, "u": us, "u_fdm": uf})
        files.append(name)
    report = {"name": sc.name, "mode": "oracle", "version": __version__, "kernel_backend": BACKEND,
              "delta": sc.delta, "h": grid.h, "differences": [d.__dict__ for d in diffs],
              "l2_max": max(d.l2 for d in diffs)}
    return Outcome(code=0, report=report, files=files, field=wf, front=front)


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def resolve_scenario_path(name: str) -> Path:
    """A path, or the name of a bundled scenario (with or without ``.scn``)."""
    p = Path(name)
    if p.is_file():
        return p
    bundled = SCENARIO_DIR / (name if name.endswith(".scn") else name + ".scn")
    if bundled.is_file():
        return bundled
    raise ScenarioError(f"scenario {name!r} not found (bundled: {', '.join(bundled_scenarios())})")


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.scn"))


def _load(args) -> Scenario:
    sc = load_scenario(resolve_scenario_path(args.scenario))
    return sc.with_overrides(delta=args.delta, horizon=args.horizon, tol=args.tol, out=args.out)


def cmd_run(args) -> int:
    sc = _load(args)
    outcome = run_scenario(sc)
    _summary(sc, outcome)
    return outcome.code


def cmd_verify(args) -> int:
    sc = _load(args)
    front = resolve_front_path(args.front, sc) if args.front else None
    if front is None and sc.mode != "verify":
        raise ScenarioError("verify needs --front or a verify-mode scenario")
    outcome = run_scenario(sc, front_path=front, verify_only=True)
    return outcome.code


def resolve_front_path(name: str, sc: Scenario) -> Path:
    for cand in (Path(name), sc.base_dir / name, SCENARIO_DIR / name):
        if cand.is_file():
            return cand
    raise ScenarioError(f"candidate front file {name!r} not found")


def _batch_one(path: str, out_root: Optional[str], overrides: dict) -> tuple[str, int, str]:
    logging.basicConfig(level=logging.WARNING)
    try:
        sc = load_scenario(path)
        out = str(Path(out_root) / sc.name) if out_root else None
        sc = sc.with_overrides(out=out, **overrides)
        outcome = run_scenario(sc)
        return sc.name, outcome.code, outcome.report.get("status", "")
    except PeelError as exc:
        return Path(path).stem, exc.exit_code, str(exc)


def cmd_batch(args) -> int:
    root = Path(args.directory)
    if not root.is_dir():
        raise ScenarioError(f"{root} is not a directory")
    paths = sorted(str(p) for p in root.glob("*.scn"))
    if not paths:
        raise ScenarioError(f"no .scn files in {root}")
    overrides = {"delta": args.delta, "horizon": args.horizon, "tol": args.tol}
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_batch_one, paths, [args.out] * len(paths), [overrides] * len(paths)))
    else:
        results = [_batch_one(p, args.out, overrides) for p in paths]
    print(f"{'scenario':<28} exit  status")
    for name, code, status in results:
        print(f"{name:<28} {code:>4}  {status}")
    return max(code for _, code, _ in results)


def cmd_convergence(args) -> int:
    sc = _load(args)
    if sc.mode not in ("prescribed", "coupled", "oracle"):
        raise ScenarioError("convergence needs a prescribed, coupled or oracle scenario")
    if args.levels < 2:
        raise ScenarioError("--levels must be at least 2")
    base = sc.out_dir
    rows = []
    prev_u = None
    for k in range(args.levels):
        delta = sc.delta / 2 ** k
        lvl = sc.with_overrides(delta=delta, out=str(base / f"level{k}"))
        if sc.mode == "oracle":
            lvl.oracle = dict(lvl.oracle, h=(sc.oracle.get("h") or sc.delta) / 2 ** k)
            o = run_scenario(lvl)
            if o.code:
                return o.code
            rows.append({"delta": delta, "l2": o.report["l2_max"]})
            continue
        o = run_scenario(lvl)
        if o.code:
            return o.code
        x = np.linspace(0.0, float(o.front.extended(sc.horizon).position(sc.horizon)) if sc.mode != "coupled"
                        else o.report["ell_end"], 201)
        t_end = o.field.t_end
        u = o.field.u(np.full(x.shape, t_end), np.minimum(x, o.report["ell_end"]), left=True)
        row = {"delta": delta, "ell_end": o.report["ell_end"],
               "balance_max": o.report["residuals"]["energy_balance_max"],
               "u_diff_prev": float(np.max(np.abs(u - prev_u))) if prev_u is not None else math.nan}
        if "griffith_violation_max" in o.report["residuals"]:
            row["violation_max"] = o.report["residuals"]["griffith_violation_max"]
        rows.append(row)
        prev_u = u
        o = None  # release the lattice arrays before the next (4x larger) level
    keys = list(rows[0])
    write_csv(base / "convergence.csv", {k: [r.get(k, math.nan) for r in rows] for k in keys})
    ratios = {}
    for key in ("balance_max", "l2", "u_diff_prev"):
        vals = [r[key] for r in rows if key in r and math.isfinite(r[key])]
        if len(vals) >= 2:
            ratios[key] = [a / b if b else math.inf for a, b in zip(vals[:-1], vals[1:])]
    write_report(base / "convergence.json", {"name": sc.name, "levels": rows, "ratios": ratios})
    print(",".join(keys))
    for r in rows:
        print(",".join(f"{r.get(k, math.nan):.6g}" for k in keys))
    for key, rs in ratios.items():
        print(f"{key} ratios: " + ", ".join(f"{x:.3g}" for x in rs))
    return 0


def _summary(sc: Scenario, outcome: Outcome):
    rep = outcome.report
    print(f"{sc.name}: exit {outcome.code} ({rep.get('status')}), output in {sc.out_dir}")
    for key, val in (rep.get("residuals") or {}).items():
        print(f"  {key} = {val:.3e}")
    for d in rep.get("diagnoses", []):
        print(f"  diagnosis: {d}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peeldyn", description="Dynamic peeling solver")
    parser.add_argument("--version", action="version", version=f"peeldyn {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, batch=False):
        if not batch:
            p.add_argument("scenario", help="scenario file or bundled scenario name")
        p.add_argument("--delta", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--horizon", type=float)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("run", help="solve a scenario and write artifacts")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("verify", help="certify a candidate front against the coupled system")
    common(p)
    p.add_argument("--front", help="candidate front CSV (t, ell)")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("batch", help="run every scenario in a directory")
    p.add_argument("directory")
    common(p, batch=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_batch)
    p = sub.add_parser("convergence", help="repeat a scenario under spacing halving")
    common(p)
    p.add_argument("--levels", type=int, default=2)
    p.set_defaults(func=cmd_convergence)
    p = sub.add_parser("list", help="list bundled scenarios")
    p.set_defaults(func=lambda a: print("\n".join(bundled_scenarios())) or 0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(args))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except PeelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
