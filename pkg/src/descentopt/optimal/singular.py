"""Singular-arc locus in the (h, V_T) plane and the speed it selects at each altitude."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from ..dynamics import admissible_gammas, speed_window
from .conditions import (SingularControlUndefined, gamma_s_residual, gamma_s_scale,
                         glc_check, singular_control)
from .trajectory import BOUNDARY, SINGULAR

ROOT_XTOL = 1e-8


@dataclass(frozen=True)
class SingularArcCurve:
    """Sampled singular locus.

    Arrays are indexed by altitude sample. ``v_sing`` is NaN where the
    residual has no sign change inside the speed envelope.
    """

    h: np.ndarray
    v_sing: np.ndarray
    gamma: np.ndarray
    glc: np.ndarray
    n_roots: np.ndarray  # sign changes found in the envelope scan
    interior: np.ndarray  # singular control strictly inside the admissible interval
    valid: np.ndarray  # root found and GLC <= 0

    def speed_at(self, h):
        ok = self.valid
        return np.interp(h, self.h[ok], self.v_sing[ok])


def _scan_roots(fun, lo, hi, n):
    vs = np.linspace(lo, hi, n)
    r = fun(vs)
    flips = np.nonzero((r[:-1] > 0) & (r[1:] <= 0))[0]
    return vs, r, flips


def singular_arc_curve(cost, wind, aircraft, envelope, h_range, dh, limits=None, n_scan=120):
    """Bracket and refine the singular-arc root at altitudes spaced ``dh`` apart.

    Each root is refined with Brent's method to 1e-8 m/s; the singular
    control and GLC quantity are attached to every root.
    """
    h_lo, h_hi = h_range
    n = max(2, int(np.ceil((h_hi - h_lo) / dh - 1e-9)) + 1)
    hs = np.linspace(h_lo, h_hi, n)
    v_sing = np.full(n, np.nan)
    gam = np.full(n, np.nan)
    glc = np.full(n, np.nan)
    n_roots = np.zeros(n, dtype=int)
    interior = np.zeros(n, dtype=bool)
    for i, h in enumerate(hs):
        lo, hi, _, _ = speed_window(h, envelope)

        def f(v, h=h):
            return gamma_s_residual(v, np.full_like(np.asarray(v, dtype=float), h), cost, wind, aircraft)

        vs, _, flips = _scan_roots(f, lo, hi, n_scan)
        n_roots[i] = len(flips)
        if not len(flips):
            continue
        j = flips[0]
        v = brentq(lambda x: float(f(x)), vs[j], vs[j + 1], xtol=ROOT_XTOL)
        v_sing[i] = v
        try:
            gam[i] = float(singular_control(v, h, cost, wind, aircraft))
        except SingularControlUndefined:
            continue
        glc[i] = float(glc_check(v, h, cost, wind, aircraft))
        if limits is not None:
            g_lo, g_hi, _ = admissible_gammas(v, limits)
            interior[i] = g_lo < gam[i] < g_hi
    valid = np.isfinite(v_sing) & np.isfinite(glc) & (glc <= 0.0)
    return SingularArcCurve(hs, v_sing, gam, glc, n_roots, interior, valid)


@dataclass(frozen=True)
class LocusPoint:
    v: float
    kind: str  # SINGULAR or BOUNDARY
    constraint: int | None


class SingularLocus:
    """Speed on the optimal locus at a given altitude.

    That is the singular root when it lies inside the speed envelope and
    otherwise the envelope bound on the side where the root lies, which is
    the bound with a non-negative state-constraint multiplier.
    """

    def __init__(self, cost, wind, aircraft, envelope):
        self.cost = cost
        self.wind = wind
        self.aircraft = aircraft
        self.envelope = envelope
        self.scale = gamma_s_scale(cost, aircraft)
        self._at = lru_cache(maxsize=4096)(self._compute)

    def residual(self, v, h):
        return float(gamma_s_residual(v, h, self.cost, self.wind, self.aircraft))

    def __call__(self, h):
        return self._at(float(h))

    def _compute(self, h):
        lo, hi, lo_i, hi_i = speed_window(h, self.envelope)
        if self.residual(lo, h) <= 0.0:
            return LocusPoint(lo, BOUNDARY, lo_i)
        if self.residual(hi, h) >= 0.0:
            return LocusPoint(hi, BOUNDARY, hi_i)
        v = brentq(lambda x: self.residual(x, h), lo, hi, xtol=1e-10, rtol=1e-14)
        return LocusPoint(v, SINGULAR, None)
