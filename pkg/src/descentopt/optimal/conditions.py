"""Hamiltonian, switching function, singular-arc residual, costates and
boundary-arc quantities for the idle-descent problem.

Every function broadcasts over numpy arrays of (V_T, h). Costates use the
Lagrange form of the cost, ``-K_cr * ground_speed + K_des``, so ``lam_x`` is
identically zero on optimal trajectories.
"""
import numpy as np

from .. import atmosphere as atm
from ..dynamics import pure_state_partials
from ..performance import k_des_partials

G = atm.G0
GAMMA_S_FD_REL = 1e-5


class SingularControlUndefined(ArithmeticError):
    """The singular-arc locus is tangent to the flow; no singular control."""


class DegenerateBoundary(ArithmeticError):
    """The boundary-arc control formula has a vanishing denominator."""


class _Terms:
    """Model terms shared by the condition formulas at one or more points."""

    __slots__ = ("v", "h", "d", "d_v", "d_h", "k", "k_v", "k_h", "eff", "gs", "gs_v", "gs_h", "a", "k_cr", "m")

    def __init__(self, v, h, cost, wind, aircraft):
        self.v = v = np.asarray(v, dtype=float)
        self.h = h = np.asarray(h, dtype=float)
        self.d, self.d_v, self.d_h = aircraft.net_drag_partials(v, h)
        self.k, self.k_v, self.k_h = k_des_partials(cost, aircraft, v, h)
        e = self.eff = wind.wind_effect(v, h)
        self.gs = e.c * v + e.wh
        self.gs_v = e.c + e.dc_dV * v
        self.gs_h = e.dc_dh * v + e.dwh_dh
        self.a = G + v * e.whchi
        self.k_cr = cost.k_cr
        self.m = aircraft.mass


def hamiltonian(v, h, lam_v, lam_x, lam_h, gamma, cost, wind, aircraft):
    t = _Terms(v, h, cost, wind, aircraft)
    return (-t.k_cr * t.gs + t.k + lam_v * (-t.d / t.m - gamma * t.a)
            + lam_x * t.gs + lam_h * t.v * gamma)


def switching(v, h, lam_v, lam_h, wind):
    """dH/dgamma, the switching function."""
    eff = wind.wind_effect(v, h)
    return -lam_v * (G + v * eff.whchi) + lam_h * v


def costates_on_arc(v, h, cost, wind, aircraft):
    """Costates forced by H = 0 and dH/dgamma = 0 on singular and boundary arcs.

    Returns:
        (lam_v, lam_x, lam_h)
    """
    t = _Terms(v, h, cost, wind, aircraft)
    lam_v = t.m * (t.k - t.k_cr * t.gs) / t.d
    return lam_v, np.zeros_like(lam_v), lam_v * t.a / t.v


def _sigma_dot(t, lam_v, lam_h):
    e = t.eff
    w, w_v = e.whchi, e.dwhchi_dV
    return (-t.a * (t.k_cr * t.gs_v - t.k_v) + t.v * (t.k_cr * t.gs_h - t.k_h)
            + lam_v / t.m * (-t.a * t.d_v + (w + t.v * w_v) * t.d + t.v * t.d_h)
            - lam_h / t.m * t.d)


def switching_rate(v, h, lam_v, lam_h, cost, wind, aircraft):
    """Time derivative of the switching function along the costate dynamics.

    It does not depend on the flight path angle (the arc is of first order).
    """
    return _sigma_dot(_Terms(v, h, cost, wind, aircraft), lam_v, lam_h)


def gamma_s_residual(v, h, cost, wind, aircraft):
    """Singular-arc residual; the singular locus is its zero set.

    Equals ``-D~ * d/dt(dH/dgamma)`` with the on-arc costates substituted.
    Positive to the left of the locus (slower), negative to the right.
    """
    t = _Terms(v, h, cost, wind, aircraft)
    e = t.eff
    net = t.k_cr * t.gs - t.k
    return (net * (t.v * t.d_h - t.a * t.d_v + t.v * e.dwhchi_dV * t.d)
            - t.d * t.k_cr * (t.gs * G / t.v - t.a * t.gs_v + t.v * t.gs_h)
            - t.d * (-t.k * G / t.v + t.a * t.k_v - t.v * t.k_h))


def gamma_s_scale(cost, aircraft):
    """Normalisation for the residual: cost rate x weight x g / cruise speed."""
    return cost.scale * aircraft.mass * G * G / cost.v_cr


def gamma_s_partials(v, h, cost, wind, aircraft, rel=GAMMA_S_FD_REL):
    """Return (Gamma_s, dGamma_s/dV_T, dGamma_s/dh) by central differences."""
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    dv = rel * np.abs(v)
    dh = rel * np.maximum(np.abs(h), 1000.0)
    vv = np.stack([v, v + dv, v - dv, v, v])
    hh = np.stack([h, h, h, h + dh, h - dh])
    r = gamma_s_residual(vv, hh, cost, wind, aircraft)
    return r[0], (r[1] - r[2]) / (2 * dv), (r[3] - r[4]) / (2 * dh)


def singular_control(v, h, cost, wind, aircraft):
    """Interior flight path angle that keeps the state on the singular locus.

    Raises:
        SingularControlUndefined: if the locus is tangent to the flow.
    """
    _, g_v, g_h = gamma_s_partials(v, h, cost, wind, aircraft)
    d = aircraft.net_drag(v, h)
    eff = wind.wind_effect(v, h)
    den = -g_v * (G + v * eff.whchi) + g_h * v
    num = g_v * d / aircraft.mass
    if np.any(np.abs(den) <= 1e-12 * np.abs(num) + 1e-300):
        raise SingularControlUndefined(f"singular control undefined at V_T={v}, h={h}")
    return num / den


def _sigma_ddot_coeffs(v, h, lam_v, lam_h, cost, wind, aircraft, rel=GAMMA_S_FD_REL):
    """Split the second derivative of the switching function as A + B*gamma.

    Partials of the switching rate in (V_T, h) are taken with the costates
    frozen; the costate rates come from the adjoint equations.
    """
    v = float(v)
    h = float(h)
    dv = rel * abs(v)
    dh = rel * max(abs(h), 1000.0)
    vv = np.array([v, v + dv, v - dv, v, v])
    hh = np.array([h, h, h, h + dh, h - dh])
    t = _Terms(vv, hh, cost, wind, aircraft)
    sd = _sigma_dot(t, lam_v, lam_h)
    sd_v = (sd[1] - sd[2]) / (2 * dv)
    sd_h = (sd[3] - sd[4]) / (2 * dh)
    e = t.eff
    d, m, a = t.d[0], t.m, t.a[0]
    w, w_v, w_h = e.whchi[0], e.dwhchi_dV[0], e.dwhchi_dh[0]
    sd_lv = (-a * t.d_v[0] + (w + v * w_v) * d + v * t.d_h[0]) / m
    sd_lh = -d / m
    lvdot0 = t.k_cr * t.gs_v[0] - t.k_v[0] + lam_v * t.d_v[0] / m
    lhdot0 = t.k_cr * t.gs_h[0] - t.k_h[0] + lam_v * t.d_h[0] / m
    a_coef = sd_v * (-d / m) + sd_lv * lvdot0 + sd_lh * lhdot0
    b_state = -sd_v * a + sd_h * v
    b_coef = b_state + sd_lv * (lam_v * (w + v * w_v) - lam_h) + sd_lh * lam_v * v * w_h
    return a_coef, b_coef, b_state


def glc_check(v, h, cost, wind, aircraft):
    """Generalized Legendre-Clebsch quantity d/dgamma of the second time
    derivative of the switching function; must be <= 0 on optimal singular arcs.

    The costate-rate contributions are included. See :func:`glc_state_terms`
    for the state-only chain terms.
    """
    lam_v, _, lam_h = costates_on_arc(v, h, cost, wind, aircraft)
    return _sigma_ddot_coeffs(v, h, float(lam_v), float(lam_h), cost, wind, aircraft)[1]


def glc_state_terms(v, h, cost, wind, aircraft):
    """State-chain part of the GLC quantity with costates held fixed."""
    lam_v, _, lam_h = costates_on_arc(v, h, cost, wind, aircraft)
    return _sigma_ddot_coeffs(v, h, float(lam_v), float(lam_h), cost, wind, aircraft)[2]


def singular_control_from_adjoint(v, h, cost, wind, aircraft):
    """Singular control from the second derivative of the switching function.

    Independent route to :func:`singular_control`; the two agree on the locus.
    """
    lam_v, _, lam_h = costates_on_arc(v, h, cost, wind, aircraft)
    a_coef, b_coef, _ = _sigma_ddot_coeffs(v, h, float(lam_v), float(lam_h), cost, wind, aircraft)
    return -a_coef / b_coef


def boundary_gamma(v, h, index, wind, aircraft, envelope):
    """Flight path angle holding pure state constraint ``index`` at zero.

    Raises:
        DegenerateBoundary: if the bracketed denominator vanishes.
    """
    _, s_v, s_h = pure_state_partials(v, h, envelope, index)
    eff = wind.wind_effect(v, h)
    den = s_v * (G + v * eff.whchi) - s_h * v
    if np.any(np.abs(den) < 1e-300) or np.any(np.abs(den) <= 1e-12 * np.abs(s_v) * G):
        raise DegenerateBoundary(f"boundary control undefined for constraint {index}")
    return -s_v * aircraft.net_drag(v, h) / aircraft.mass / den


def eta_a(v, h, index, gamma, cost, wind, aircraft, envelope):
    """Multiplier of the active pure state constraint; must be >= 0."""
    _, s_v, _ = pure_state_partials(v, h, envelope, index)
    d = aircraft.net_drag(v, h)
    return -(aircraft.mass * gamma / d**2) * gamma_s_residual(v, h, cost, wind, aircraft) / s_v


def lambda_h_rate(v, h, lam_h, gamma, cost, wind, aircraft):
    """Altitude costate rate off the singular locus, with lam_v eliminated by H = 0.

    Returns:
        (d lam_h / dt, lam_v)
    """
    t = _Terms(v, h, cost, wind, aircraft)
    lam_v = t.m * (lam_h * t.v * gamma + t.k - t.k_cr * t.gs) / (t.d + t.m * t.a * gamma)
    rate = t.k_cr * t.gs_h - t.k_h + lam_v * (t.d_h / t.m + gamma * t.v * t.eff.dwhchi_dh)
    return rate, lam_v
