"""ISA atmosphere and airspeed conversions (TAS, CAS, Mach).

All functions accept floats or numpy arrays and broadcast elementwise.
Altitudes are geopotential metres, speeds m/s.
"""
from dataclasses import dataclass

import numpy as np

G0 = 9.80665  # m/s^2
R_AIR = 287.05287  # J/(kg K)
KAPPA = 1.4
T0 = 288.15  # K
P0 = 101325.0  # Pa
RHO0 = P0 / (R_AIR * T0)
LAPSE = -0.0065  # K/m
H_TROP = 11000.0  # m
H_MAX = 20000.0  # m
T_TROP = T0 + LAPSE * H_TROP
P_TROP = P0 * (T_TROP / T0) ** (-G0 / (LAPSE * R_AIR))

# unit conversions used at I/O boundaries
KT = 1852.0 / 3600.0  # m/s per knot
FT = 0.3048  # m per foot
NM = 1852.0  # m per nautical mile


class AtmosphereDomainError(ValueError):
    """Altitude outside the modelled atmosphere."""


@dataclass(frozen=True)
class AtmosState:
    temperature: np.ndarray | float
    pressure: np.ndarray | float
    density: np.ndarray | float
    delta: np.ndarray | float
    theta: np.ndarray | float
    sound_speed: np.ndarray | float


def _check_range(h):
    h = np.asarray(h, dtype=float)
    if not np.all((h >= 0.0) & (h <= H_MAX)):  # NaN fails both comparisons
        raise AtmosphereDomainError(f"altitude outside [0, {H_MAX:g}] m: {h}")
    return h


def _temperature(h):
    return np.where(h < H_TROP, T0 + LAPSE * h, T_TROP)


def _pressure(h):
    p_low = P0 * (np.minimum(T0 + LAPSE * h, T0) / T0) ** (-G0 / (LAPSE * R_AIR))
    p_high = P_TROP * np.exp(-G0 * (h - H_TROP) / (R_AIR * T_TROP))
    return np.where(h < H_TROP, p_low, p_high)


def atmos_at(h):
    """ISA state at altitude ``h``.

    Raises:
        AtmosphereDomainError: if ``h`` is outside [0, 20000] m.
    """
    h = _check_range(h)
    temp = _temperature(h)
    p = _pressure(h)
    rho = p / (R_AIR * temp)
    out = AtmosState(
        temperature=temp,
        pressure=p,
        density=rho,
        delta=p / P0,
        theta=temp / T0,
        sound_speed=np.sqrt(KAPPA * R_AIR * temp),
    )
    if out.temperature.ndim == 0:
        out = AtmosState(*(float(v) for v in (temp, p, rho, p / P0, temp / T0, out.sound_speed)))
    return out


def density(h):
    h = _check_range(h)
    return _pressure(h) / (R_AIR * _temperature(h))


def _dtemp_dh(h):
    return np.where(h < H_TROP, LAPSE, 0.0)


def _ddelta_dh(h):
    # hydrostatic: dp/dh = -rho g
    return -density(h) * G0 / P0


def _cas_parts(v_tas, h):
    h = _check_range(h)
    temp = _temperature(h)
    delta = _pressure(h) / P0
    u = v_tas**2 / (7.0 * R_AIR * temp)
    big_p = (1.0 + u) ** 3.5
    q = 1.0 + delta * (big_p - 1.0)
    return h, temp, delta, u, big_p, q


def cas_from_tas(v_tas, h):
    """Calibrated airspeed from true airspeed (isentropic pitot relation)."""
    _, _, _, _, _, q = _cas_parts(v_tas, h)
    return np.sqrt(7.0 * R_AIR * T0 * (q ** (2.0 / 7.0) - 1.0))


def tas_from_cas(v_cas, h):
    """True airspeed from calibrated airspeed.

    The pitot relation inverts in closed form; no iteration is needed.
    """
    h = _check_range(h)
    temp = _temperature(h)
    delta = _pressure(h) / P0
    impact = (1.0 + np.asarray(v_cas, dtype=float) ** 2 / (7.0 * R_AIR * T0)) ** 3.5 - 1.0
    return np.sqrt(7.0 * R_AIR * temp * ((1.0 + impact / delta) ** (2.0 / 7.0) - 1.0))


def cas_partials(v_tas, h):
    """Return (V_CAS, dV_CAS/dV_T, dV_CAS/dh) analytically."""
    h, temp, delta, u, big_p, q = _cas_parts(v_tas, h)
    v_cas = np.sqrt(7.0 * R_AIR * T0 * (q ** (2.0 / 7.0) - 1.0))
    dp_dv = v_tas / (R_AIR * temp) * (1.0 + u) ** 2.5
    dp_dtemp = -(v_tas**2) / (2.0 * R_AIR * temp**2) * (1.0 + u) ** 2.5
    dq_dv = delta * dp_dv
    dq_dh = (big_p - 1.0) * _ddelta_dh(h) + delta * dp_dtemp * _dtemp_dh(h)
    scale = R_AIR * T0 * q ** (-5.0 / 7.0) / v_cas
    return v_cas, scale * dq_dv, scale * dq_dh


def mach(v_tas, h):
    h = _check_range(h)
    return np.asarray(v_tas, dtype=float) / np.sqrt(KAPPA * R_AIR * _temperature(h))


def mach_partials(v_tas, h):
    """Return (M, dM/dV_T, dM/dh) analytically."""
    h = _check_range(h)
    temp = _temperature(h)
    a = np.sqrt(KAPPA * R_AIR * temp)
    m = v_tas / a
    return m, 1.0 / a, -0.5 * m / temp * _dtemp_dh(h)


def tas_from_mach(m, h):
    h = _check_range(h)
    return np.asarray(m, dtype=float) * np.sqrt(KAPPA * R_AIR * _temperature(h))
