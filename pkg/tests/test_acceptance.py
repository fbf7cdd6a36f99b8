"""Acceptance suite: one PASS/FAIL line per criterion, printed in the pytest summary."""
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from descentopt import atmosphere as atm
from descentopt.cli import SWEEP_WINDS, sweep, sweep_diagnostics
from descentopt.optimal.check import check_optimality
from descentopt.optimal.generator import generate_trajectory
from descentopt.performance import model_from_bada3, read_bada3_opf
from descentopt.verify import GridSpec, compare, dp_solve

import test_atmosphere
import test_dynamics
import test_wind
from conftest import SCENARIOS, scenario

CHECK_SECONDS = 10.0
DP_SECONDS = 300.0
DP_GAP = 0.02
DP_GRIDS = (GridSpec(100, 50, 21), GridSpec(200, 100, 21), GridSpec(400, 200, 21))
CROSS_CAS_KT = 2.0
BADA_REL = 0.01
RK4_ORDER = 3.9

# zero-wind fuel-optimal rows for licensed BADA 3.6 data: TOD NM, TA s, fuel kg
BADA_ROWS = {
    "B735": ("DESCENTOPT_BADA_B735", (220.0, 340.0, 0.45, 0.82), (-108.369, 1038.248, 311.588)),
    "B764": ("DESCENTOPT_BADA_B764", (230.0, 360.0, 0.45, 0.84), (-116.167, 1020.959, 528.991)),
}


def _cas_profile(traj, band):
    """CAS (kt) at altitudes ``band`` along a descending trajectory (first pass)."""
    s = traj.samples
    order = np.argsort(s[:, 1], kind="stable")
    h, v = s[order, 1], s[order, 0]
    keep = np.concatenate([[True], np.diff(h) > 1e-9])
    return np.interp(band, h[keep], atm.cas_from_tas(v[keep], h[keep])) / atm.KT


def test_necessary_conditions(acceptance):
    assert len(SCENARIOS) >= 6
    bad, slowest = [], 0.0
    for name in SCENARIOS:
        t0 = time.perf_counter()
        sc = scenario(name)
        report = check_optimality(generate_trajectory(sc), sc)
        dt = time.perf_counter() - t0
        slowest = max(slowest, dt)
        if not report.passed or dt >= CHECK_SECONDS:
            bad.append(f"{name} ({', '.join(i.name for i in report.failures)}; {dt:.1f} s)")
    ok = acceptance(1, not bad, f"necessary conditions on {len(SCENARIOS)} scenarios, slowest {slowest:.1f} s"
                    + (f"; failing: {'; '.join(bad)}" if bad else ""))
    assert ok, bad


@pytest.mark.parametrize("name", ["syn735_fuel_calm", "syn735_nox_tail30"])
def test_dp_oracle_equivalence(acceptance, name):
    sc = scenario(name)
    traj = generate_trajectory(sc)
    t0 = time.perf_counter()
    gaps = [compare(traj, dp_solve(sc, g)).rel_cost_gap for g in DP_GRIDS]
    dt = time.perf_counter() - t0
    mags = np.abs(gaps)
    ok = mags[-1] <= DP_GAP and bool(np.all(np.diff(mags) < 0.0)) and dt < DP_SECONDS
    text = ", ".join(f"{g.n_h}x{g.n_v}x{g.n_gamma}: {100 * x:+.3f}%" for g, x in zip(DP_GRIDS, gaps))
    acceptance(f"2 [{name}]", ok, f"DP cost gap {text}; {dt:.0f} s")
    assert ok, (gaps, dt)


@pytest.fixture(scope="module")
def wind_sweeps():
    return {cost: sweep(scenario(f"syn735_{cost}_calm"), SWEEP_WINDS)[0] for cost in ("fuel", "nox")}


def test_wind_trends(acceptance, wind_sweeps):
    notes, ok = [], True
    for cost, rows in wind_sweeps.items():
        diag = sweep_diagnostics(rows)
        ok &= all(diag.values())
        notes.append(f"{cost}: " + ", ".join(k for k, v in diag.items() if v) + "".join(
            f", NOT {k}" for k, v in diag.items() if not v))
    farther = larger = True
    for f, n in zip(wind_sweeps["fuel"], wind_sweeps["nox"]):
        assert f["wind_mps"] == n["wind_mps"]
        farther &= abs(n["tod_nm"]) > abs(f["tod_nm"])
        larger &= n["ta_s"] > f["ta_s"]
    ok &= farther and larger
    notes.append(f"NOx TOD farther at every wind: {farther}, NOx TA larger at every wind: {larger}")
    acceptance(3, ok, "wind sweep " + "; ".join(notes))
    assert ok


def test_cross_wind_materiality(acceptance):
    devs = {}
    for cost in ("fuel", "nox"):
        a = generate_trajectory(scenario(f"syn735_{cost}_tail30"))
        b = generate_trajectory(scenario(f"syn735_{cost}_cross60"))
        lo = max(a.samples[:, 1].min(), b.samples[:, 1].min())
        hi = min(a.samples[:, 1].max(), b.samples[:, 1].max())
        band = np.linspace(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo), 200)
        devs[cost] = (float(np.max(np.abs(_cas_profile(a, band) - _cas_profile(b, band)))), a, b)
    _, a, b = devs["nox"]
    with_boundary = [n for n, t in (("tail30", a), ("cross60", b)) if any(k.startswith("boundary") for k in t.structure)]
    structural = a.structure != b.structure and bool(with_boundary)
    ok = all(d[0] > CROSS_CAS_KT for d in devs.values()) and structural
    acceptance(4, ok, f"max CAS deviation fuel {devs['fuel'][0]:.2f} kt, NOx {devs['nox'][0]:.2f} kt; "
               f"NOx arcs tail30 {a.structure} vs cross60 {b.structure}; boundary arc in {with_boundary}")
    assert ok


@pytest.mark.parametrize("ac", sorted(BADA_ROWS))
def test_bada_reproduction(acceptance, ac):
    env_var, (vmin, vmax, mmin, mmax), (tod, ta, fuel) = BADA_ROWS[ac]
    path = os.environ.get(env_var)
    if not path:
        acceptance(f"5 [{ac}]", None, f"set {env_var} to a licensed BADA 3.6 OPF file to run")
        pytest.skip(f"{env_var} not set")
    model = model_from_bada3(read_bada3_opf(path), ac, vmin, vmax, mmin, mmax)
    base = scenario("syn735_fuel_calm")
    sc = replace(base, aircraft=model, name=f"{ac.lower()}_fuel_calm")
    s = generate_trajectory(sc).summary()
    errs = [abs(s["tod_nm"] - tod) / abs(tod), abs(s["ta_s"] - ta) / ta, abs(s["fuel_kg"] - fuel) / fuel]
    ok = max(errs) <= BADA_REL
    acceptance(f"5 [{ac}]", ok, f"TOD {s['tod_nm']:.3f} NM, TA {s['ta_s']:.3f} s, fuel {s['fuel_kg']:.3f} kg; "
               f"max rel err {100 * max(errs):.2f}%")
    assert ok


def test_numerical_hygiene(acceptance, syn735):
    test_wind.test_partials_match_high_precision_derivatives()
    test_atmosphere.test_cas_and_mach_partials_match_finite_differences()
    test_dynamics.test_pure_state_partials_match_finite_differences(syn735)
    ref = test_dynamics._bang_low_run(syn735, 1.0 / 64)
    errs = [np.linalg.norm((test_dynamics._bang_low_run(syn735, s) - ref)[:4]) for s in (4.0, 2.0, 1.0)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = bool(np.all(orders >= RK4_ORDER))
    acceptance(6, ok, "wind, CAS, Mach and constraint partials within 1e-6 on 1000 samples each; "
               f"RK4 orders {', '.join(f'{o:.2f}' for o in orders)}")
    assert ok
