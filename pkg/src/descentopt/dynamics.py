"""Point-mass vertical-plane dynamics, admissible controls and RK4 integration."""
from dataclasses import dataclass

import numpy as np

from . import atmosphere as atm

# Layout of the augmented integration vector. The first four entries are
# the physical state, the rest running integrals carried for bookkeeping.
IV, IH, IX, IT = 0, 1, 2, 3
IK, IG, IF, INOX, ICO, IHC = 4, 5, 6, 7, 8, 9
NY = 10
INTEGRALS = {"k_des": IK, "ground": IG, "fuel": IF, "NOx": INOX, "CO": ICO, "HC": IHC}


class InfeasibleControlError(ValueError):
    """No admissible flight path angle at this state."""


class NoJunctionError(RuntimeError):
    """Integration horizon exhausted before any stop event fired."""


@dataclass(frozen=True)
class State:
    V: float  # true airspeed, m/s
    h: float  # altitude, m
    x: float  # along-track position (negative before threshold), m
    t: float  # s

    @classmethod
    def from_vector(cls, y):
        return cls(float(y[IV]), float(y[IH]), float(y[IX]), float(y[IT]))

    def vector(self):
        y = np.zeros(NY)
        y[:4] = (self.V, self.h, self.x, self.t)
        return y


@dataclass(frozen=True)
class PathLimits:
    gamma_min: float  # rad
    gamma_max: float  # rad
    rod_min: float  # m/s
    rod_max: float  # m/s
    level_allowed: bool = True

    def __post_init__(self):
        if not self.gamma_min < self.gamma_max <= 0.0:
            raise ValueError("need gamma_min < gamma_max <= 0")
        if not 0.0 < self.rod_min < self.rod_max:
            raise ValueError("need 0 < rod_min < rod_max")


def eom(v, h, gamma, aircraft, wind):
    """Return (dV_T/dt, dx_s/dt, dh/dt) of the small-angle idle-thrust model."""
    eff = wind.wind_effect(v, h)
    vdot = -aircraft.net_drag(v, h) / aircraft.mass - gamma * (atm.G0 + v * eff.whchi)
    return vdot, eff.c * v + eff.wh, v * gamma


def admissible_gammas(v, limits):
    """Descending interval of admissible flight path angles.

    Returns:
        (gamma_lo, gamma_hi, level_allowed). Level flight is an extra isolated
        admissible point when the descent-rate band forbids shallow descent.

    Raises:
        InfeasibleControlError: if the interval is empty and level flight is not allowed.
    """
    lo = max(limits.gamma_min, -limits.rod_max / v)
    hi = min(limits.gamma_max, -limits.rod_min / v)
    level = limits.level_allowed and limits.gamma_min <= 0.0 <= limits.gamma_max
    if lo > hi and not level:
        raise InfeasibleControlError(f"no admissible flight path angle at V_T={v:.2f} m/s")
    return lo, hi, level


def mixed_constraints(v, gamma, limits):
    """Signed mixed path constraints (ROD band, gamma bounds); <= 0 is satisfied."""
    hdot = v * gamma
    return np.array([
        -hdot - limits.rod_max,
        limits.rod_min + hdot,
        gamma - limits.gamma_max,
        limits.gamma_min - gamma,
    ])


def pure_state_constraints(v, h, envelope):
    """Signed CAS and Mach bounds [CAS-max, min-CAS, M-max, min-M]; <= 0 is satisfied."""
    cas = atm.cas_from_tas(v, h)
    m = atm.mach(v, h)
    return np.array([
        cas - envelope.v_max_cas,
        envelope.v_min_cas - cas,
        m - envelope.m_max,
        envelope.m_min - m,
    ])


def constraint_scales(envelope):
    return np.array([envelope.v_max_cas, envelope.v_min_cas, envelope.m_max, envelope.m_min])


def pure_state_partials(v, h, envelope, index):
    """Value and analytic (dS/dV_T, dS/dh) for one pure state constraint."""
    if index in (0, 1):
        val, dv, dh = atm.cas_partials(v, h)
        bound = envelope.v_max_cas if index == 0 else envelope.v_min_cas
    else:
        val, dv, dh = atm.mach_partials(v, h)
        bound = envelope.m_max if index == 2 else envelope.m_min
    if index in (0, 2):
        return val - bound, dv, dh
    return bound - val, -dv, -dh


def speed_window(h, envelope):
    """True-airspeed interval allowed by the CAS and Mach bounds at ``h``.

    Returns:
        (v_lo, v_hi, lo_index, hi_index) with the index of the binding constraint.
    """
    cas_lo = float(atm.tas_from_cas(envelope.v_min_cas, h))
    cas_hi = float(atm.tas_from_cas(envelope.v_max_cas, h))
    m_lo = float(atm.tas_from_mach(envelope.m_min, h))
    m_hi = float(atm.tas_from_mach(envelope.m_max, h))
    lo, lo_i = (cas_lo, 1) if cas_lo >= m_lo else (m_lo, 3)
    hi, hi_i = (cas_hi, 0) if cas_hi <= m_hi else (m_hi, 2)
    return lo, hi, lo_i, hi_i


def make_rhs(aircraft, wind, cost, control):
    """Right-hand side for the augmented vector under feedback ``control(y)``."""
    from .performance import k_des

    species = bool(aircraft.ei_table)

    def rhs(y):
        v, h = y[IV], y[IH]
        gamma = control(y)
        eff = wind.wind_effect(v, h)
        dy = np.zeros(NY)
        dy[IV] = -aircraft.net_drag(v, h) / aircraft.mass - gamma * (atm.G0 + v * eff.whchi)
        gs = eff.c * v + eff.wh
        dy[IX] = gs
        dy[IH] = v * gamma
        dy[IT] = 1.0
        dy[IK] = k_des(cost, aircraft, v, h)
        dy[IG] = gs
        ff = aircraft.fuel_flow_idle(v, h)
        dy[IF] = ff
        if species:
            for sp, ei in aircraft.emission_indices(v, h, ff).items():
                dy[INTEGRALS[sp]] = ei * ff
        return dy

    return rhs


def rk4_step(rhs, y, dt):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class IntegrationResult:
    samples: np.ndarray  # (n, NY)
    event: int | None  # index of the event that stopped integration


def integrate(y0, rhs, events=(), direction=1, step=0.5, max_time=20000.0,
              project=None, time_tol=1e-6, require_event=True):
    """Fixed-step RK4 with bisection-localised stop events.

    Backward integration (``direction=-1``) integrates the negated field, so
    time and all running integrals decrease.

    Args:
        y0: initial augmented vector.
        rhs: forward-time derivative ``rhs(y)``.
        events: callables ``e(y)``; integration stops at the first sign change.
        project: optional map applied after every step (drift correction).

    Raises:
        NoJunctionError: if ``require_event`` and no event fires within ``max_time``.
    """
    sgn = 1.0 if direction >= 0 else -1.0

    def field(y):
        return sgn * rhs(y)

    def advance(y, dt):
        y1 = rk4_step(field, y, dt)
        return project(y1) if project is not None else y1

    y = np.array(y0, dtype=float)
    out = [y.copy()]
    prev = [e(y) for e in events]
    elapsed = 0.0
    while elapsed < max_time:
        y_new = advance(y, step)
        vals = [e(y_new) for e in events]
        # an event that starts exactly at zero stays disarmed until it leaves zero
        hit = [i for i, (a, b) in enumerate(zip(prev, vals)) if a != 0.0 and np.sign(a) != np.sign(b)]
        if hit:
            lo, hi = 0.0, step
            first = min(hit, key=lambda i: _first_crossing(events[i], advance, y, prev[i], step, time_tol))
            fn, a0 = events[first], prev[first]
            y_hi = y_new
            while hi - lo > time_tol:
                mid = 0.5 * (lo + hi)
                y_mid = advance(y, mid)
                if np.sign(fn(y_mid)) == np.sign(a0):
                    lo = mid
                else:
                    hi, y_hi = mid, y_mid
            out.append(y_hi)
            return IntegrationResult(np.array(out), first)
        y = y_new
        prev = vals
        out.append(y.copy())
        elapsed += step
    if require_event and events:
        raise NoJunctionError(f"no stop event within {max_time:g} s (state V={y[IV]:.2f}, h={y[IH]:.1f})")
    return IntegrationResult(np.array(out), None)


def _first_crossing(fn, advance, y, a0, step, tol):
    lo, hi = 0.0, step
    while hi - lo > max(tol, 1e-3):
        mid = 0.5 * (lo + hi)
        if np.sign(fn(advance(y, mid))) == np.sign(a0):
            lo = mid
        else:
            hi = mid
    return hi
