import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from descentopt import atmosphere as atm
from descentopt.cli import (EXIT_CHECK, EXIT_OK, EXIT_SYNTHESIS, EXIT_VALIDATION, TrajectoryFileError, main,
                            read_trajectory_csv, sweep_diagnostics, trajectory_csv)
from descentopt.optimal.check import check_optimality
from descentopt.optimal.generator import overshoot_trajectory
from descentopt.scenario import (ScenarioError, builtin_scenario_names, load_scenario, scenario_from_dict,
                                 wind_from_records, wind_to_records)
from descentopt.wind import WindProfile

from conftest import scenario, trajectory

BASE = {
    "name": "t",
    "aircraft": "SYN735",
    "cost": {"kind": "fuel"},
    "boundary": {"v_cas0_kt": 265, "h0_ft": 35000, "v_casf_kt": 250, "hf_ft": 13000, "s_f_nm": -40, "d_max_nm": -150},
}


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    assert main(["solve", "--scenario", "syn735_fuel_calm", "--out", str(out)]) == EXIT_OK
    return out


def test_solve_outputs(solved):
    summary = json.loads((solved / "summary.json").read_text())
    assert {"tod_nm", "ta_s", "fuel_kg", "structure", "optimality_passed"} <= set(summary)
    assert summary["optimality_passed"] is True
    assert summary["tod_nm"] == pytest.approx(trajectory("syn735_fuel_calm").tod_x / atm.NM)
    lines = (solved / "trajectory.csv").read_text().splitlines()
    assert lines[0].startswith("# units") and "1 NM = 1852.0 m" in lines[1]
    header = lines[3].split(",")
    assert header[:16] == ["t", "V_T", "V_CAS", "M", "h", "x_s", "gamma", "arc", "arc_id", "H", "H_gamma",
                           "Gamma_s", "S1", "S2", "S3", "S4"]


def test_solve_is_byte_stable(solved, tmp_path):
    assert main(["solve", "--scenario", "syn735_fuel_calm", "--out", str(tmp_path), "--format", "json"]) == EXIT_OK
    for f in ("trajectory.csv", "summary.json"):
        assert (tmp_path / f).read_bytes() == (solved / f).read_bytes()


def test_check_command_passes_on_solver_output(solved, capsys):
    assert main(["check", "--scenario", "syn735_fuel_calm", "--trajectory", str(solved / "trajectory.csv")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS hamiltonian" in out


def test_check_command_fails_on_perturbed_trajectory(tmp_path):
    sc = scenario("syn735_fuel_calm")
    p = tmp_path / "bad.csv"
    p.write_text(trajectory_csv(overshoot_trajectory(sc, 5.0)))
    assert main(["check", "--scenario", "syn735_fuel_calm", "--trajectory", str(p)]) == EXIT_CHECK


def test_check_command_rejects_empty_file(tmp_path, capsys):
    p = tmp_path / "empty.csv"
    p.write_text("")
    assert main(["check", "--scenario", "syn735_fuel_calm", "--trajectory", str(p)]) == EXIT_VALIDATION
    assert "no samples" in capsys.readouterr().err


def test_csv_round_trip_is_exact():
    tr = trajectory("syn735_nox_tail30")
    back = read_trajectory_csv(trajectory_csv(tr))
    assert back.structure == tr.structure
    assert np.array_equal(back.samples, tr.samples) and np.array_equal(back.gammas, tr.gammas)
    rep = check_optimality(back, scenario("syn735_nox_tail30"))
    assert rep.passed


def test_csv_reader_errors():
    with pytest.raises(TrajectoryFileError):
        read_trajectory_csv("# only comments\n")
    with pytest.raises(TrajectoryFileError):
        read_trajectory_csv("t,V_T\n1,2\n")


def test_malformed_scenario_reports_invariant(tmp_path, capsys):
    doc = json.loads(json.dumps(BASE))
    doc["boundary"]["hf_ft"] = 36000
    assert main(["solve", "--scenario", write(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert "initial altitude must be above final altitude" in capsys.readouterr().err
    del doc["boundary"]
    assert main(["solve", "--scenario", write(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["solve", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_synthesis_failure_exit_code(tmp_path):
    doc = json.loads(json.dumps(BASE))
    doc["boundary"].update(v_casf_kt=300, hf_ft=35000 - 300 / 0.3048)
    assert main(["solve", "--scenario", write(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_SYNTHESIS


def test_oracle_command(capsys):
    assert main(["oracle", "--scenario", "syn735_fuel_calm", "--grid", "60x30x11"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert {"rel_cost_gap", "tod_gap_nm", "max_cas_dev_kt", "grid"} <= set(doc)
    assert abs(doc["rel_cost_gap"]) < 0.05


def test_sweep_command(tmp_path):
    assert main(["sweep", "--scenario", "syn735_fuel_calm", "--winds=-10,0,10", "--out", str(tmp_path),
                 "--format", "json"]) == EXIT_OK
    doc = json.loads((tmp_path / "sweep.json").read_text())
    assert [r["wind_mps"] for r in doc["rows"]] == [-10.0, 0.0, 10.0]
    assert all(doc["diagnostics"].values())


def test_sweep_diagnostics_detect_violations():
    rows = [{"wind_mps": w, "tod_nm": t, "ta_s": a, "locus_cas_kt": c}
            for w, t, a, c in ((0.0, -100.0, 1000.0, 250.0), (10.0, -99.0, 990.0, 249.0))]
    assert sweep_diagnostics(rows) == {"tod_distance_increasing": False, "ta_decreasing": True,
                                       "locus_cas_decreasing": True}


def test_list_command(capsys):
    assert main(["list"]) == EXIT_OK
    assert capsys.readouterr().out.split() == builtin_scenario_names()


def test_aircraft_override(tmp_path, syn735):
    doc = syn735.to_dict()
    doc["mass"] = 57000.0
    p = write(tmp_path, doc, "ac.json")
    sc = load_scenario(write(tmp_path, BASE), p)
    assert sc.aircraft.mass == 57000.0


def test_scenario_loader_units(tmp_path):
    doc = json.loads(json.dumps(BASE))
    doc["wind"] = [{"h_ft": 10000, "wh_kt": 20, "wc_kt": -5}, {"h_ft": 0, "wh_kt": 10}]
    sc = load_scenario(write(tmp_path, doc))
    b = sc.boundary
    assert b.h0 == 35000 * 0.3048 and b.s_f == -40 * 1852.0 and b.d_max == -150 * 1852.0
    assert sc.wind.altitudes == (0.0, 10000 * 0.3048) and sc.wind.wh[0] == 10 * 1852.0 / 3600.0
    assert sc.cost_kind == "fuel" and sc.species is None
    with pytest.raises(ScenarioError):
        scenario_from_dict({**BASE, "aircraft": "NOPE"})
    with pytest.raises(ScenarioError):
        scenario_from_dict({**BASE, "cost": {"kind": "emission", "species": "SOx"}})


def test_shipped_scenarios_cover_acceptance_cases():
    names = set(builtin_scenario_names())
    for cost in ("fuel", "nox"):
        for wind in ("calm", "tail30", "head30", "cross60"):
            assert f"syn735_{cost}_{wind}" in names
    a, b = scenario("syn735_nox_tail30").wind, scenario("syn735_nox_cross60").wind
    assert a.wh == pytest.approx(b.wh) and a.max_cross() == 0.0 and b.max_cross() > 50.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-500.0, 500.0), st.floats(0.0, 45000.0), st.floats(-150.0, 150.0), st.floats(-150.0, 150.0))
def test_unit_round_trips(nm, ft, wh_kt, wc_kt):
    assert nm * atm.NM / atm.NM == pytest.approx(nm, rel=1e-15, abs=1e-300)
    recs = wind_to_records(wind_from_records([{"h_ft": ft, "wh_kt": wh_kt, "wc_kt": wc_kt}]))
    assert recs[0]["h_ft"] == pytest.approx(ft, rel=1e-15, abs=1e-12)
    assert recs[0]["wh_kt"] == pytest.approx(wh_kt, rel=1e-15, abs=1e-12)
    assert recs[0]["wc_kt"] == pytest.approx(wc_kt, rel=1e-15, abs=1e-12)
    assert wind_from_records([]) == WindProfile.calm()
