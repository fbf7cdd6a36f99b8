"""Command line: solve, sweep, check and oracle.

Exit codes: 0 ok, 2 validation error, 3 synthesis or oracle failure,
4 optimality check failure. Outputs are byte-stable for identical inputs:
floats are written with ``repr`` precision and JSON keys are sorted.
"""
import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import atmosphere as atm
from .dynamics import IH, INTEGRALS, IT, IV, IX, NY, State
from .optimal.check import check_optimality
from .optimal.generator import SynthesisError, _rel_gap, generate_trajectory
from .optimal.singular import SingularLocus
from .optimal.trajectory import BOUNDARY, CONSTRAINT_NAMES, SINGULAR, Arc, Junction, Trajectory
from .performance import TodRangeError, ModelValidationError, load_aircraft
from .scenario import ScenarioError, builtin_scenario, builtin_scenario_names, load_scenario
from .verify import GridSpec, OracleInfeasible, compare, dp_solve
from .wind import WindProfile

EXIT_OK, EXIT_VALIDATION, EXIT_SYNTHESIS, EXIT_CHECK = 0, 2, 3, 4
SWEEP_WINDS = (-30.0, -10.0, 0.0, 10.0, 30.0)

STATE_COLUMNS = [
    ("t", "s"), ("V_T", "m/s"), ("V_CAS", "m/s"), ("M", "-"), ("h", "m"), ("x_s", "m"),
    ("gamma", "rad"), ("arc", "-"), ("arc_id", "-"), ("H", "cost/s"), ("H_gamma", "cost"),
    ("Gamma_s", "cost/s^2"), ("S1", "m/s"), ("S2", "m/s"), ("S3", "-"), ("S4", "-"),
]
INTEGRAL_COLUMNS = [("k_des", "cost"), ("ground", "m"), ("fuel", "kg"), ("NOx", "g"), ("CO", "g"), ("HC", "g")]


class TrajectoryFileError(ValueError):
    """Trajectory file is empty or malformed."""


def _f(x):
    return repr(float(x))


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n"


# -- trajectory files --------------------------------------------------------

def trajectory_csv(traj, report=None):
    """Trajectory as CSV text with a commented unit header."""
    out = io.StringIO()
    out.write("# units: SI; t s, speeds m/s, h and x_s m, gamma rad; integrals since top of descent\n")
    out.write(f"# conversions: 1 NM = {atm.NM!r} m, 1 kt = {atm.KT!r} m/s, 1 ft = {atm.FT!r} m\n")
    out.write("# units row: " + ",".join(u for _, u in STATE_COLUMNS + INTEGRAL_COLUMNS) + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow([c for c, _ in STATE_COLUMNS + INTEGRAL_COLUMNS])
    n = len(traj.samples)
    series = report.series if report is not None else {}
    nan = np.full(n, np.nan)
    ham, hg, gs = (series.get(k, nan) for k in ("H", "H_gamma", "Gamma_s"))
    s_all = series.get("S", np.full((n, 4), np.nan))
    row = 0
    for k, a in enumerate(traj.arcs):
        for y, g in zip(a.samples, a.gammas):
            v, h = y[IV], y[IH]
            vals = [y[IT], v, atm.cas_from_tas(v, h), atm.mach(v, h), h, y[IX], g]
            w.writerow([_f(x) for x in vals] + [a.label, k]
                       + [_f(x) for x in (ham[row], hg[row], gs[row])]
                       + [_f(x) for x in s_all[row]]
                       + [_f(y[INTEGRALS[c]]) for c, _ in INTEGRAL_COLUMNS])
            row += 1
    return out.getvalue()


def read_trajectory_csv(text):
    """Rebuild a :class:`Trajectory` from :func:`trajectory_csv` output.

    Raises:
        TrajectoryFileError: on an empty file or missing columns.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if len(lines) < 2:
        raise TrajectoryFileError("trajectory file has no samples")
    reader = csv.DictReader(lines)
    need = {"t", "V_T", "h", "x_s", "gamma", "arc", "arc_id"} | {c for c, _ in INTEGRAL_COLUMNS}
    missing = need - set(reader.fieldnames or ())
    if missing:
        raise TrajectoryFileError(f"trajectory file lacks columns: {', '.join(sorted(missing))}")
    groups = {}
    try:
        for r in reader:
            y = np.zeros(NY)
            y[IV], y[IH], y[IX], y[IT] = float(r["V_T"]), float(r["h"]), float(r["x_s"]), float(r["t"])
            for c, _ in INTEGRAL_COLUMNS:
                y[INTEGRALS[c]] = float(r[c])
            key = int(r["arc_id"])
            groups.setdefault(key, (r["arc"], [], []))
            groups[key][1].append(y)
            groups[key][2].append(float(r["gamma"]))
    except (TypeError, ValueError) as exc:
        raise TrajectoryFileError(f"malformed trajectory row: {exc}") from exc
    arcs = []
    for key in sorted(groups):
        label, ys, gs = groups[key]
        kind, _, cname = label.partition(":")
        constraint = None
        if kind == BOUNDARY:
            if cname not in CONSTRAINT_NAMES:
                raise TrajectoryFileError(f"unknown boundary constraint {cname!r}")
            constraint = CONSTRAINT_NAMES.index(cname)
        arcs.append(Arc(kind, np.array(ys), np.array(gs), constraint))
    junctions = [Junction(float(b.samples[0, IT]), (a.label, b.label), State.from_vector(b.samples[0]),
                          _rel_gap(a.samples[-1], b.samples[0])) for a, b in zip(arcs[:-1], arcs[1:])]
    return Trajectory(arcs, junctions)


# -- commands ---------------------------------------------------------------

def _load(args):
    ref = args.scenario
    if ref is None:
        raise ScenarioError("--scenario is required")
    if not Path(ref).exists() and ref in builtin_scenario_names():
        sc = builtin_scenario(ref)
        if args.aircraft:
            sc = load_scenario_with_aircraft(sc, args.aircraft)
        return sc
    if not Path(ref).exists():
        raise ScenarioError(f"scenario not found: {ref} (built-in: {', '.join(builtin_scenario_names())})")
    return load_scenario(ref, args.aircraft)


def load_scenario_with_aircraft(sc, aircraft_path):
    return replace(sc, aircraft=load_aircraft(aircraft_path))


def solve_summary(sc, traj, report):
    s = traj.summary()
    s["scenario"] = sc.name
    s["cost_kind"] = sc.cost_kind if sc.species is None else f"{sc.cost_kind}:{sc.species}"
    s["optimality_passed"] = report.passed
    return s


def run_solve(args):
    sc = _load(args)
    traj = generate_trajectory(sc)
    report = check_optimality(traj, sc)
    summary = solve_summary(sc, traj, report)
    out = Path(args.out)
    _atomic_write(out / "trajectory.csv", trajectory_csv(traj, report))
    _atomic_write(out / "summary.json", _json(summary))
    if args.format == "json":
        sys.stdout.write(_json(summary))
    else:
        sys.stdout.write(_summary_table([summary]))
    return EXIT_OK


def _summary_table(rows, keys=("scenario", "tod_nm", "ta_s", "fuel_kg")):
    extra = [k for k in ("nox_g", "co_g", "hc_g", "wind_mps", "locus_cas_kt") if any(k in r for r in rows)]
    keys = list(keys) + extra
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow([_fmt(r.get(k, "")) for k in keys])
    return out.getvalue()


def _fmt(x):
    return f"{x:.3f}" if isinstance(x, float) else x


def locus_cas(sc, h):
    """CAS (m/s) of the optimal locus at altitude ``h``."""
    loc = SingularLocus(sc.cost, sc.wind, sc.aircraft, sc.envelope)
    return float(atm.cas_from_tas(loc(h).v, h))


def _sweep_point(sc, wind_mps):
    wc = sc.wind.wc
    wind = WindProfile(sc.wind.altitudes, tuple(float(wind_mps) for _ in wc), wc)
    point = sc.with_wind(wind, name=f"{sc.name}@{wind_mps:+g}")
    traj = generate_trajectory(point)
    report = check_optimality(traj, point)
    row = solve_summary(point, traj, report)
    row["wind_mps"] = float(wind_mps)
    b = point.boundary
    row["locus_cas_kt"] = locus_cas(point, 0.5 * (b.h0 + b.hf)) / atm.KT
    sing = [a for a in traj.arcs if a.kind == SINGULAR]
    if sing:
        s = np.concatenate([a.samples for a in sing])
        row["singular_cas_mean_kt"] = float(np.mean(atm.cas_from_tas(s[:, IV], s[:, IH]))) / atm.KT
    return row


def _strict(values, sign):
    d = np.diff(values)
    return bool(np.all(sign * d > 0.0))


def sweep_diagnostics(rows):
    """Monotonicity of TOD distance, arrival time and locus CAS in tailwind."""
    rows = sorted(rows, key=lambda r: r["wind_mps"])
    tod = np.array([abs(r["tod_nm"]) for r in rows])
    ta = np.array([r["ta_s"] for r in rows])
    cas = np.array([r["locus_cas_kt"] for r in rows])
    return {
        "tod_distance_increasing": _strict(tod, 1.0),
        "ta_decreasing": _strict(ta, -1.0),
        "locus_cas_decreasing": _strict(cas, -1.0),
    }


def sweep(sc, winds=SWEEP_WINDS, jobs=1):
    """Solve ``sc`` at each constant along-track wind; rows are in ``winds`` order."""
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_point, [sc] * len(winds), winds))
    else:
        rows = [_sweep_point(sc, w) for w in winds]
    return rows, sweep_diagnostics(rows)


def run_sweep(args):
    sc = _load(args)
    winds = tuple(float(w) for w in args.winds.split(","))
    rows, diag = sweep(sc, winds, args.jobs)
    out = Path(args.out)
    doc = {"scenario": sc.name, "rows": rows, "diagnostics": diag}
    _atomic_write(out / "sweep.json", _json(doc))
    _atomic_write(out / "sweep.csv", _summary_table(rows))
    sys.stdout.write(_json(doc) if args.format == "json" else _summary_table(rows) + _json(diag))
    return EXIT_OK


def run_check(args):
    sc = _load(args)
    if not args.trajectory:
        raise ScenarioError("--trajectory is required")
    with open(args.trajectory) as fh:
        traj = read_trajectory_csv(fh.read())
    report = check_optimality(traj, sc)
    doc = report.to_dict()
    if args.out:
        _atomic_write(Path(args.out) / "check.json", _json(doc))
    if args.format == "json":
        sys.stdout.write(_json(doc))
    else:
        for it in report.items:
            sys.stdout.write(f"{'PASS' if it.passed else 'FAIL'} {it.name} worst={it.worst:.3e} tol={it.tol:.1e}"
                             f"{' ' + it.detail if it.detail else ''}\n")
    return EXIT_OK if report.passed else EXIT_CHECK


def run_oracle(args):
    sc = _load(args)
    grid = GridSpec.parse(args.grid)
    traj = generate_trajectory(sc)
    dp = dp_solve(sc, grid)
    doc = compare(traj, dp).to_dict()
    doc.update(scenario=sc.name, grid=args.grid, ds_m=dp.ds, stages=dp.n_stages, tod_dp_nm=dp.tod_x / atm.NM)
    if args.out:
        _atomic_write(Path(args.out) / "oracle.json", _json(doc))
    sys.stdout.write(_json(doc))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="descentopt", description="Optimal idle descent synthesis and verification.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default=None):
        sp.add_argument("--scenario", help="scenario JSON path or built-in scenario name")
        sp.add_argument("--aircraft", help="aircraft JSON overriding the scenario's aircraft")
        sp.add_argument("--out", default=out_default, help="output directory")
        sp.add_argument("--format", choices=("csv", "json"), default="csv", help="stdout format")

    common(sub.add_parser("solve", help="synthesize the optimal descent"), "out")
    sw = sub.add_parser("sweep", help="solve over constant along-track winds")
    common(sw, "out")
    sw.add_argument("--winds", default=",".join(f"{w:g}" for w in SWEEP_WINDS), help="comma-separated m/s; write --winds=-30,0,30 when the list starts with a minus")
    sw.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    ck = sub.add_parser("check", help="evaluate necessary conditions on a trajectory CSV")
    common(ck)
    ck.add_argument("--trajectory", help="trajectory CSV written by solve")
    orc = sub.add_parser("oracle", help="compare the synthesis with the grid DP optimum")
    common(orc)
    orc.add_argument("--grid", default="400x200x21", help="NHxNVxNG")
    sub.add_parser("list", help="list built-in scenarios")
    return p


COMMANDS = {"solve": run_solve, "sweep": run_sweep, "check": run_check, "oracle": run_oracle}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        sys.stdout.write("\n".join(builtin_scenario_names()) + "\n")
        return EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, ModelValidationError, TrajectoryFileError, TodRangeError, OSError,
            json.JSONDecodeError) as exc:
        sys.stderr.write(f"validation error: {exc}\n")
        return EXIT_VALIDATION
    except ValueError as exc:
        sys.stderr.write(f"validation error: {exc}\n")
        return EXIT_VALIDATION
    except (SynthesisError, OracleInfeasible) as exc:
        sys.stderr.write(f"synthesis failure: {exc}\n")
        return EXIT_SYNTHESIS


if __name__ == "__main__":
    sys.exit(main())
