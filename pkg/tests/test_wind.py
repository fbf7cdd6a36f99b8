import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from descentopt.wind import CrabInfeasibleError, WindProfile

SHEAR = WindProfile((0.0, 4000.0, 12000.0), (5.0, 25.0, 40.0), (-10.0, 15.0, 30.0))


def test_constant_profile():
    assert tuple(float(x) for x in WindProfile.constant(10.0, 0.0).wind_at(3000.0)) == (10.0, 0.0, 0.0, 0.0)


def test_linear_midpoint():
    w = WindProfile((0.0, 10000.0), (0.0, 20.0), (0.0, 0.0))
    wh, wc, dwh, dwc = w.wind_at(5000.0)
    assert wh == pytest.approx(10.0) and dwh == pytest.approx(0.002) and wc == 0.0 and dwc == 0.0


def test_clamped_outside_span():
    w = WindProfile((1000.0, 10000.0), (4.0, 20.0), (1.0, 2.0))
    lo = w.wind_at(0.0)
    hi = w.wind_at(15000.0)
    assert (float(lo[0]), float(lo[1]), float(lo[2]), float(lo[3])) == (4.0, 1.0, 0.0, 0.0)
    assert (float(hi[0]), float(hi[1]), float(hi[2]), float(hi[3])) == (20.0, 2.0, 0.0, 0.0)


def test_invalid_breakpoints():
    with pytest.raises(ValueError):
        WindProfile((0.0, 0.0), (1.0, 2.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        WindProfile((0.0,), (1.0, 2.0), (0.0,))


def test_no_cross_wind_geometry():
    e = SHEAR.wind_effect(200.0, 2000.0)
    w = WindProfile(SHEAR.altitudes, SHEAR.wh, (0.0, 0.0, 0.0)).wind_effect(200.0, 2000.0)
    assert w.c == 1.0 and w.s == 0.0 and w.whchi == pytest.approx(SHEAR.wind_at(2000.0)[2])
    assert e.c < 1.0


def test_thirty_degree_crab():
    e = WindProfile.constant(0.0, 100.0).wind_effect(200.0, 5000.0)
    assert abs(e.s) == pytest.approx(0.5) and e.c == pytest.approx(math.sqrt(3) / 2)
    assert abs(e.psi_w) == pytest.approx(math.radians(30.0))


def test_crab_infeasible():
    with pytest.raises(CrabInfeasibleError):
        WindProfile.constant(0.0, 250.0).wind_effect(200.0, 1000.0)


def test_constant_wind_has_no_shear_coupling():
    e = WindProfile.constant(20.0, 30.0).wind_effect(np.linspace(150, 250, 11), 6000.0)
    assert np.all(e.whchi == 0.0) and np.all(e.dwhchi_dV == 0.0) and np.all(e.dwhchi_dh == 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(120.0, 280.0), st.floats(0.0, 12000.0), st.floats(-60.0, 60.0), st.floats(0.0, 80.0))
def test_ground_speed_even_in_cross_wind(v, h, wh, wc):
    a = WindProfile.constant(wh, wc).ground_speed(v, h)
    b = WindProfile.constant(wh, -wc).ground_speed(v, h)
    assert a == b
    e = WindProfile.constant(wh, wc).wind_effect(v, h)
    assert e.c**2 + e.s**2 == pytest.approx(1.0, abs=1e-15) and e.c > 0


def _mp_geometry(profile, v, h):
    """Independent c and W_h,chi as mpmath functions of (V_T, h) inside one segment."""
    alts = profile.altitudes
    k = max(i for i in range(len(alts) - 1) if alts[i] <= h)
    h0, h1 = alts[k], alts[k + 1]
    swh = (mp.mpf(profile.wh[k + 1]) - profile.wh[k]) / (h1 - h0)
    swc = (mp.mpf(profile.wc[k + 1]) - profile.wc[k]) / (h1 - h0)

    def sc(vv, hh):
        s = -(profile.wc[k] + swc * (hh - h0)) / vv
        return s, mp.sqrt(1 - s * s)

    def c(vv, hh):
        return sc(vv, hh)[1]

    def whchi(vv, hh):
        s, cc = sc(vv, hh)
        return cc * swh + s * swc

    return c, whchi


def test_partials_match_high_precision_derivatives():
    mp.mp.dps = 30
    rng = np.random.default_rng(11)
    v = rng.uniform(120.0, 300.0, 1000)
    h = rng.uniform(0.0, 11900.0, 1000)
    h = np.where(np.min(np.abs(h[:, None] - np.array(SHEAR.altitudes)), axis=1) < 20.0, h + 50.0, h)
    e = SHEAR.wind_effect(v, h)
    for i in range(len(v)):
        c, whchi = _mp_geometry(SHEAR, v[i], h[i])
        vi, hi = mp.mpf(v[i]), mp.mpf(h[i])
        pairs = (
            (e.dc_dV[i], mp.diff(lambda x: c(x, hi), vi)),
            (e.dc_dh[i], mp.diff(lambda x: c(vi, x), hi)),
            (e.dwhchi_dV[i], mp.diff(lambda x: whchi(x, hi), vi)),
            (e.dwhchi_dh[i], mp.diff(lambda x: whchi(vi, x), hi)),
        )
        for an, ref in pairs:
            assert abs(an - float(ref)) <= 1e-6 * abs(float(ref)) + 1e-300
