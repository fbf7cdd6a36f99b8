"""Aircraft performance: lift, drag, idle thrust, idle fuel flow, emissions.

The coefficient forms follow BADA 3 conventions (parabolic drag polar,
quadratic-in-altitude idle thrust, linear-in-altitude idle fuel flow) but
with altitudes in metres. Emission indices use a Boeing Fuel Flow Method 2
style correction without the humidity term.
"""
import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import atmosphere as atm

SPECIES = ("NOx", "CO", "HC")
FD_REL_STEP = 1e-6


class ModelValidationError(ValueError):
    """Aircraft model coefficients are inconsistent or fail the envelope scan."""


@dataclass(frozen=True)
class Envelope:
    v_min_cas: float  # m/s
    v_max_cas: float  # m/s
    m_min: float
    m_max: float

    def __post_init__(self):
        if not (self.v_min_cas < self.v_max_cas and self.m_min < self.m_max):
            raise ModelValidationError("envelope minimum must be below maximum")


@dataclass(frozen=True)
class AircraftModel:
    name: str
    mass: float  # kg
    wing_area: float  # m^2
    cd0: float
    cd2: float
    ct1: float  # N
    ct2: float  # m
    ct3: float  # 1/m^2
    cf3: float  # kg/min
    cf4: float  # m
    cruise_fuel_flow: float  # kg/s
    envelope: Envelope
    ei_table: dict = field(default_factory=dict)  # species -> ((ff kg/s, ...), (EI g/kg, ...))

    def __post_init__(self):
        if self.mass <= 0 or self.wing_area <= 0:
            raise ModelValidationError("mass and wing area must be positive")
        if self.cd2 < 0:
            raise ModelValidationError("cd2 must be non-negative")
        if self.cruise_fuel_flow <= 0:
            raise ModelValidationError("cruise fuel flow must be positive")
        for sp, (ff, ei) in self.ei_table.items():
            if sp not in SPECIES:
                raise ModelValidationError(f"unknown emission species {sp!r}")
            if len(ff) != len(ei) or len(ff) == 0:
                raise ModelValidationError(f"{sp} table: fuel flow and EI lengths differ")
            if np.any(np.diff(ff) <= 0) or np.any(np.asarray(ff) <= 0):
                raise ModelValidationError(f"{sp} table: fuel flows must be positive, increasing")
            if np.any(np.asarray(ei) <= 0):
                raise ModelValidationError(f"{sp} table: EI values must be positive")

    # --- forces -------------------------------------------------------

    def lift_coefficient(self, v_tas, h):
        return 2.0 * self.mass * atm.G0 / (atm.density(h) * v_tas**2 * self.wing_area)

    def drag(self, v_tas, h):
        rho = atm.density(h)
        qs = 0.5 * rho * v_tas**2 * self.wing_area
        cl = self.mass * atm.G0 / qs
        return qs * (self.cd0 + self.cd2 * cl * cl)

    def idle_thrust(self, v_tas, h):
        h = np.asarray(h, dtype=float)
        return self.ct1 * (1.0 - h / self.ct2 + self.ct3 * h * h) + 0.0 * v_tas

    def net_drag(self, v_tas, h):
        return self.drag(v_tas, h) - self.idle_thrust(v_tas, h)

    def net_drag_partials(self, v_tas, h):
        """Return (D~, dD~/dV_T, dD~/dh) by central differences."""
        return _central(self.net_drag, v_tas, h)

    # --- fuel and emissions ------------------------------------------

    def fuel_flow_idle(self, v_tas, h):
        h = np.asarray(h, dtype=float)
        return np.maximum(self.cf3 * (1.0 - h / self.cf4) / 60.0, 0.0) + 0.0 * v_tas

    def emission_index(self, species, v_tas, h, fuel_flow=None):
        """Emission index (g/kg) corrected to flight conditions.

        ``fuel_flow`` defaults to the idle fuel flow at the same point.
        """
        if species not in self.ei_table:
            raise KeyError(f"aircraft {self.name} has no {species} emission table")
        return self.emission_indices(v_tas, h, fuel_flow, species=(species,))[species]

    def emission_indices(self, v_tas, h, fuel_flow=None, species=None):
        """Emission indices for several species sharing one atmosphere evaluation."""
        st = atm.atmos_at(h)
        m = v_tas / st.sound_speed
        wf = self.fuel_flow_idle(v_tas, h) if fuel_flow is None else fuel_flow
        wf_ref = wf / st.delta * st.theta**3.8 * np.exp(0.2 * m * m)
        nox_corr = np.sqrt(st.delta**1.02 / st.theta**3.3)
        out = {}
        for sp in self.ei_table if species is None else species:
            ff_tab, ei_tab = self._ei_log[sp]
            if ff_tab.size == 1:
                ei_ref = np.exp(ei_tab[0]) + 0.0 * wf_ref
            else:
                lw = np.log(np.clip(wf_ref, np.exp(ff_tab[0]), np.exp(ff_tab[-1])))
                ei_ref = np.exp(np.interp(lw, ff_tab, ei_tab))
            out[sp] = ei_ref * (nox_corr if sp == "NOx" else 1.0 / nox_corr**2)
        return out

    @cached_property
    def _ei_log(self):
        return {sp: (np.log(np.asarray(ff, dtype=float)), np.log(np.asarray(ei, dtype=float)))
                for sp, (ff, ei) in self.ei_table.items()}

    def validate_envelope(self, h_lo, h_hi, v_min_cas=None, v_max_cas=None, m_min=None, m_max=None, n=41):
        """Scan the speed/altitude envelope and require a positive net drag.

        Raises:
            ModelValidationError: if D - T <= 0 anywhere on the scan grid.
        """
        env = self.envelope
        v_lo_c = env.v_min_cas if v_min_cas is None else v_min_cas
        v_hi_c = env.v_max_cas if v_max_cas is None else v_max_cas
        hs = np.linspace(h_lo, h_hi, n)
        for h in hs:
            v_lo = max(float(atm.tas_from_cas(v_lo_c, h)), float(atm.tas_from_mach(env.m_min if m_min is None else m_min, h)))
            v_hi = min(float(atm.tas_from_cas(v_hi_c, h)), float(atm.tas_from_mach(env.m_max if m_max is None else m_max, h)))
            if v_hi <= v_lo:
                continue
            vs = np.linspace(v_lo, v_hi, n)
            nd = self.net_drag(vs, h)
            if np.any(nd <= 0.0):
                raise ModelValidationError(
                    f"{self.name}: net drag not positive at h={h:.0f} m, V_T={vs[np.argmin(nd)]:.1f} m/s"
                )

    # --- serialization -----------------------------------------------

    def to_dict(self):
        return {
            "name": self.name,
            "units": dict(MODEL_UNITS),
            "mass": self.mass,
            "wing_area": self.wing_area,
            "cd0": self.cd0,
            "cd2": self.cd2,
            "idle_thrust_coeffs": [self.ct1, self.ct2, self.ct3],
            "idle_fuel_coeffs": [self.cf3, self.cf4],
            "cruise_fuel_flow": self.cruise_fuel_flow,
            "envelope": {
                "v_min_cas": self.envelope.v_min_cas / atm.KT,
                "v_max_cas": self.envelope.v_max_cas / atm.KT,
                "m_min": self.envelope.m_min,
                "m_max": self.envelope.m_max,
            },
            "ei_table": {sp: {"fuel_flow": list(ff), "ei": list(ei)} for sp, (ff, ei) in self.ei_table.items()},
        }


MODEL_UNITS = {
    "mass": "kg",
    "wing_area": "m2",
    "idle_thrust_coeffs": "N, m, 1/m2",
    "idle_fuel_coeffs": "kg/min, m",
    "cruise_fuel_flow": "kg/s",
    "envelope.v_min_cas": "kt",
    "envelope.v_max_cas": "kt",
    "ei_table.fuel_flow": "kg/s",
    "ei_table.ei": "g/kg",
}


def _central(fun, v, h, rel=FD_REL_STEP):
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    v, h = np.broadcast_arrays(v, h)
    dv = rel * np.maximum(np.abs(v), 1.0)
    dh = rel * np.maximum(np.abs(h), 1000.0)
    # one vectorised call for the centre and the four offset points
    f = fun(np.stack([v, v + dv, v - dv, v, v]), np.stack([h, h, h, h + dh, h - dh]))
    return f[0], (f[1] - f[2]) / (2.0 * dv), (f[3] - f[4]) / (2.0 * dh)


def model_from_dict(d):
    """Build an :class:`AircraftModel` from its JSON document form."""
    units = d.get("units", MODEL_UNITS)
    for key, unit in MODEL_UNITS.items():
        if units.get(key, unit) != unit:
            raise ModelValidationError(f"unsupported unit for {key}: {units[key]!r} (expected {unit!r})")
    try:
        env = d["envelope"]
        ct = d["idle_thrust_coeffs"]
        cf = d["idle_fuel_coeffs"]
        ei = {sp: (tuple(t["fuel_flow"]), tuple(t["ei"])) for sp, t in d.get("ei_table", {}).items()}
        return AircraftModel(
            name=d["name"],
            mass=float(d["mass"]),
            wing_area=float(d["wing_area"]),
            cd0=float(d["cd0"]),
            cd2=float(d["cd2"]),
            ct1=float(ct[0]),
            ct2=float(ct[1]),
            ct3=float(ct[2]),
            cf3=float(cf[0]),
            cf4=float(cf[1]),
            cruise_fuel_flow=float(d["cruise_fuel_flow"]),
            envelope=Envelope(
                v_min_cas=float(env["v_min_cas"]) * atm.KT,
                v_max_cas=float(env["v_max_cas"]) * atm.KT,
                m_min=float(env["m_min"]),
                m_max=float(env["m_max"]),
            ),
            ei_table=ei,
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ModelValidationError(f"malformed aircraft document: {exc!r}") from exc


def load_aircraft(path):
    path = Path(path)
    with open(path) as fh:
        return model_from_dict(json.load(fh))


# --- BADA 3 ---------------------------------------------------------------

_BADA_FLOAT = re.compile(r"[-+]?\d*\.\d+[EeDd][-+]?\d+")


def _bada_cruise_fuel_flow(cf1, cf2, cfcr, drag_n, v_tas):
    eta = cf1 * (1.0 + (v_tas / atm.KT) / cf2)  # kg/(min kN)
    return eta * drag_n / 1000.0 * cfcr / 60.0


def model_from_bada3(coeffs, name, v_min_cas_kt, v_max_cas_kt, m_min, m_max,
                     cruise_cas_kt=265.0, cruise_alt_ft=35000.0, ei_table=None):
    """Map BADA 3 coefficients onto an :class:`AircraftModel`.

    ``coeffs`` holds ``mass, S, cd0, cd2, ctc1, ctc2, ctc3, ctdes_high,
    cf1, cf2, cf3, cf4, cfcr`` in BADA units (ft for altitudes). Idle thrust
    is ``ctdes_high`` times maximum climb thrust; the cruise fuel flow is the
    BADA cruise fuel flow at the given cruise condition.
    """
    ft = atm.FT
    model = AircraftModel(
        name=name,
        mass=coeffs["mass"],
        wing_area=coeffs["S"],
        cd0=coeffs["cd0"],
        cd2=coeffs["cd2"],
        ct1=coeffs["ctdes_high"] * coeffs["ctc1"],
        ct2=coeffs["ctc2"] * ft,
        ct3=coeffs["ctc3"] / ft**2,
        cf3=coeffs["cf3"],
        cf4=coeffs["cf4"] * ft,
        cruise_fuel_flow=1.0,
        envelope=Envelope(v_min_cas_kt * atm.KT, v_max_cas_kt * atm.KT, m_min, m_max),
        ei_table=ei_table or {},
    )
    h_cr = cruise_alt_ft * ft
    v_cr = float(atm.tas_from_cas(cruise_cas_kt * atm.KT, h_cr))
    ff = _bada_cruise_fuel_flow(coeffs["cf1"], coeffs["cf2"], coeffs["cfcr"], float(model.drag(v_cr, h_cr)), v_cr)
    return AircraftModel(**{**model.__dict__, "cruise_fuel_flow": ff})


def read_bada3_opf(path):
    """Read the coefficients used here from a BADA 3 ``.OPF`` file.

    Only lines starting with ``CD`` carry data. The cruise configuration line
    is found by its ``CR`` tag; the thrust and fuel blocks are the last float
    lines of the file in their documented order.
    """
    rows = []
    cr = None
    with open(path, encoding="latin-1") as fh:
        for line in fh:
            if not line.startswith("CD"):
                continue
            vals = [float(t.replace("D", "E").replace("d", "e")) for t in _BADA_FLOAT.findall(line)]
            if not vals:
                continue
            if cr is None and re.search(r"\bCR\b", line):
                cr = vals
            rows.append(vals)
    if cr is None or len(rows) < 10:
        raise ModelValidationError(f"{path}: not a recognisable BADA 3 OPF file")
    mass_row, aero_row = rows[0], rows[2]
    # trailing blocks: climb thrust, descent thrust, descent speeds,
    # thrust fuel, descent fuel, cruise fuel, ground
    thr, des, _, fuel1, fuel2, fuel3, _ = rows[-7:]
    return {
        "mass": mass_row[0] * 1000.0,  # tonnes in file
        "S": aero_row[0],
        "cd0": cr[1],  # after Vstall; a trailing unused column may follow
        "cd2": cr[2],
        "ctc1": thr[0],
        "ctc2": thr[1],
        "ctc3": thr[2],
        "ctdes_high": des[1],
        "cf1": fuel1[0],
        "cf2": fuel1[1],
        "cf3": fuel2[0],
        "cf4": fuel2[1],
        "cfcr": fuel3[0],
    }


# --- cost coefficients ----------------------------------------------------


@dataclass(frozen=True)
class CostSpec:
    """Cost functional: cruise cost per metre plus descent cost per second.

    ``kind`` is ``"fuel"`` (kg) or ``"emission"`` (g of ``species``).
    """

    kind: str
    k_cr: float
    d_max: float
    species: str | None = None
    v_cr: float = 1.0  # cruise ground speed used to build k_cr (m/s)

    def __post_init__(self):
        if self.kind not in ("fuel", "emission"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.kind == "emission" and self.species not in SPECIES:
            raise ValueError(f"emission cost needs a species in {SPECIES}")
        if not self.k_cr > 0.0:
            raise ValueError("cruise cost coefficient must be positive")

    @property
    def scale(self):
        """Cost rate used to normalise tolerances (K_cr * V_cr)."""
        return self.k_cr * self.v_cr


def make_cost(aircraft, kind, d_max, v_cr_tas, h_cr, v_cr_ground, species=None):
    """Cruise cost coefficient from cruise fuel flow and cruise ground speed."""
    if kind == "fuel":
        k_cr = aircraft.cruise_fuel_flow / v_cr_ground
    else:
        ei = float(aircraft.emission_index(species, v_cr_tas, h_cr, fuel_flow=aircraft.cruise_fuel_flow))
        k_cr = ei * aircraft.cruise_fuel_flow / v_cr_ground
    return CostSpec(kind=kind, k_cr=k_cr, d_max=d_max, species=species, v_cr=v_cr_ground)


def k_des(cost, aircraft, v_tas, h):
    ff = aircraft.fuel_flow_idle(v_tas, h)
    if cost.kind == "fuel":
        return ff
    return aircraft.emission_index(cost.species, v_tas, h) * ff


def k_des_partials(cost, aircraft, v_tas, h):
    """Return (K_des, dK_des/dV_T, dK_des/dh) by central differences."""
    return _central(lambda v, hh: k_des(cost, aircraft, v, hh), v_tas, h)


class TodRangeError(ValueError):
    """Top of descent lies beyond the cruise datum d_max."""


def total_cost(traj, cost, rtol=1e-8):
    """Total cost from d_max to the meter fix, evaluated two ways.

    The Mayer form charges cruise up to the top of descent plus the
    descent integral; the Lagrange form charges cruise to the terminal
    point and credits ground distance flown during the descent. The two
    must agree.

    Returns:
        (mayer_cost, lagrange_cost)
    """
    x0 = traj.tod_x
    if x0 < cost.d_max:
        raise TodRangeError(f"top of descent {x0:.1f} m lies before d_max {cost.d_max:.1f} m")
    xf = traj.terminal.x
    mayer = cost.k_cr * (x0 - cost.d_max) + traj.integral("k_des")
    lagrange = cost.k_cr * (xf - cost.d_max) + (traj.integral("k_des") - cost.k_cr * traj.integral("ground"))
    if not math.isclose(mayer, lagrange, rel_tol=rtol, abs_tol=rtol * cost.scale):
        raise AssertionError(f"cost forms disagree: {mayer!r} vs {lagrange!r}")
    return mayer, lagrange
