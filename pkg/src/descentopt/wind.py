"""Altitude-dependent wind and the crab-angle geometry it induces.

The along-track wind ``W_h`` is positive as a tailwind. The cross wind ``W_c``
is positive to the right of track; the airspeed vector is rotated so that its
cross-track component cancels it, ``sin(psi_w) = -W_c / V_T``.
"""
from dataclasses import dataclass

import numpy as np


class CrabInfeasibleError(ValueError):
    """Cross wind at least as fast as the airspeed; the track cannot be held."""


@dataclass(frozen=True)
class WindEffect:
    c: np.ndarray | float
    s: np.ndarray | float
    whchi: np.ndarray | float
    dc_dV: np.ndarray | float
    dc_dh: np.ndarray | float
    dwhchi_dV: np.ndarray | float
    dwhchi_dh: np.ndarray | float
    wh: np.ndarray | float
    dwh_dh: np.ndarray | float

    @property
    def psi_w(self):
        return np.arctan2(self.s, self.c)


@dataclass(frozen=True)
class WindProfile:
    """Piecewise-linear wind in altitude, clamped with zero shear outside the span.

    Args:
        altitudes: breakpoint altitudes, strictly increasing (m).
        wh: along-track wind at each breakpoint (m/s, tailwind positive).
        wc: cross-track wind at each breakpoint (m/s).
    """

    altitudes: tuple[float, ...]
    wh: tuple[float, ...]
    wc: tuple[float, ...]

    def __post_init__(self):
        n = len(self.altitudes)
        if n < 1 or len(self.wh) != n or len(self.wc) != n:
            raise ValueError("wind profile needs matching, non-empty breakpoint lists")
        if np.any(np.diff(self.altitudes) <= 0.0):
            raise ValueError("wind profile altitudes must be strictly increasing")

    @classmethod
    def constant(cls, wh=0.0, wc=0.0):
        return cls((0.0,), (float(wh),), (float(wc),))

    @classmethod
    def calm(cls):
        return cls.constant(0.0, 0.0)

    def wind_at(self, h):
        """Return (W_h, W_c, dW_h/dh, dW_c/dh) at altitude ``h``."""
        h = np.asarray(h, dtype=float)
        alts = np.asarray(self.altitudes)
        wh = np.asarray(self.wh)
        wc = np.asarray(self.wc)
        if alts.size == 1:
            z = np.zeros_like(h)
            return wh[0] + z, wc[0] + z, z, z.copy()
        seg = np.clip(np.searchsorted(alts, h, side="right") - 1, 0, alts.size - 2)
        dh = alts[seg + 1] - alts[seg]
        slope_h = (wh[seg + 1] - wh[seg]) / dh
        slope_c = (wc[seg + 1] - wc[seg]) / dh
        inside = (h >= alts[0]) & (h <= alts[-1])
        hc = np.clip(h, alts[0], alts[-1])
        w_h = wh[seg] + slope_h * (hc - alts[seg])
        w_c = wc[seg] + slope_c * (hc - alts[seg])
        return w_h, w_c, np.where(inside, slope_h, 0.0), np.where(inside, slope_c, 0.0)

    def max_cross(self):
        return float(np.max(np.abs(self.wc)))

    def wind_effect(self, v_tas, h):
        """Crab geometry and the shear coupling term with analytic partials.

        Raises:
            CrabInfeasibleError: if ``|W_c| >= V_T`` anywhere.
        """
        v = np.asarray(v_tas, dtype=float)
        w_h, w_c, dwh, dwc = self.wind_at(h)
        if np.any(np.abs(w_c) >= v):
            raise CrabInfeasibleError("cross wind exceeds airspeed")
        s = -w_c / v
        c = np.sqrt(1.0 - s * s)
        ds_dv = w_c / v**2
        ds_dh = -dwc / v
        dc_dv = -s * ds_dv / c
        dc_dh = -s * ds_dh / c
        return WindEffect(
            c=c,
            s=s,
            whchi=c * dwh + s * dwc,
            dc_dV=dc_dv,
            dc_dh=dc_dh,
            dwhchi_dV=dc_dv * dwh + ds_dv * dwc,
            dwhchi_dh=dc_dh * dwh + ds_dh * dwc,
            wh=w_h,
            dwh_dh=dwh,
        )

    def ground_speed(self, v_tas, h):
        eff = self.wind_effect(v_tas, h)
        return eff.c * v_tas + eff.wh
