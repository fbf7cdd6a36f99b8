from dataclasses import replace

import numpy as np
import pytest

from descentopt import atmosphere as atm
from descentopt.dynamics import admissible_gammas, constraint_scales, pure_state_constraints
from descentopt.scenario import make_boundary
from descentopt.verify import DPResult, GridSpec, OracleInfeasible, compare, dp_solve

from conftest import scenario, trajectory


def test_grid_spec_parse_and_invariants():
    g = GridSpec.parse("400x200x21")
    assert (g.n_h, g.n_v, g.n_gamma) == (400, 200, 21)
    assert g.refined() == GridSpec(800, 400, 21)
    for bad in ("400x200", "ax2x3"):
        with pytest.raises(ValueError):
            GridSpec.parse(bad)
    with pytest.raises(ValueError):
        GridSpec(1, 10, 5)


@pytest.fixture(scope="module")
def coarse():
    sc = scenario("syn735_fuel_calm")
    return sc, {spec: dp_solve(sc, GridSpec.parse(spec)) for spec in ("100x50x21", "200x100x21")}


def test_gap_shrinks_under_refinement(coarse):
    _, res = coarse
    tr = trajectory("syn735_fuel_calm")
    gaps = [abs(compare(tr, res[s]).rel_cost_gap) for s in ("100x50x21", "200x100x21")]
    assert gaps[1] < gaps[0] < 0.02


def test_dp_not_far_below_synthesis(coarse):
    # the DP is a feasible-suboptimal bound up to the capture-box slack of one grid cell
    _, res = coarse
    tr = trajectory("syn735_fuel_calm")
    for r in res.values():
        assert r.cost >= tr.cost_value * (1 - 0.005)


def test_dp_path_respects_constraints(coarse):
    sc, res = coarse
    for r in res.values():
        v, h, gam = r.path[:, 1], r.path[:, 2], r.path[:-1, 3]
        s = pure_state_constraints(v, h, sc.envelope) / constraint_scales(sc.envelope)[:, None]
        cell = 1.0 / r.grid.n_v  # nearest-node replay may overshoot by a fraction of a cell
        assert np.max(s) <= cell
        for vi, g in zip(v[:-1], gam):
            lo, hi, level = admissible_gammas(vi, sc.limits)
            assert (level and g == 0.0) or lo - 1e-12 <= g <= hi + 1e-12
        assert h[-1] >= sc.boundary.hf and np.all(np.diff(r.path[:, 0]) > 0)
        assert r.tod_x >= sc.boundary.d_max and r.path[-1, 0] == pytest.approx(sc.boundary.s_f)


def test_trivial_scenario_is_pure_cruise():
    sc = scenario("syn735_fuel_calm")
    nb = make_boundary(265.0, 35000.0, 265.0, 35000.0 - 1.0 / atm.FT, -40.0, -150.0)
    t = replace(sc, boundary=nb)
    closed = t.cost.k_cr * (nb.s_f - nb.d_max)
    gaps = []
    for n_v in (20, 80):
        r = dp_solve(t, GridSpec(4, n_v, 11))
        gaps.append(abs(r.cost - closed) / closed)
        assert r.tod_x == pytest.approx(nb.s_f, abs=0.05 * atm.NM)
    assert gaps[0] < 2e-3 and gaps[1] < gaps[0]


def test_unreachable_meter_fix():
    sc = scenario("syn735_fuel_calm")
    nb = make_boundary(265.0, 35000.0, 300.0, 35000.0 - 300.0 / atm.FT, -40.0, -150.0)
    with pytest.raises(OracleInfeasible):
        dp_solve(replace(sc, boundary=nb), GridSpec(40, 40, 21))


def test_compare_with_itself_is_zero():
    tr = trajectory("syn735_fuel_calm")
    s = tr.samples
    path = np.column_stack([s[:, 2], s[:, 0], s[:, 1], tr.gammas])
    same = DPResult(tr.cost_value, tr.tod_x, path, GridSpec(2, 2, 2), 1.0, 1)
    c = compare(tr, same)
    assert (c.rel_cost_gap, c.tod_gap, c.max_cas_dev) == (0.0, 0.0, 0.0)
    assert set(c.to_dict()) == {"cost_gen", "cost_dp", "rel_cost_gap", "tod_gap_nm", "max_cas_dev_kt"}
