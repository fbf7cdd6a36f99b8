"""Scenario files: aircraft reference, wind profile, cost, boundary conditions, limits.

Files are JSON with explicit unit suffixes (``_kt``, ``_ft``, ``_nm``,
``_deg``); everything is converted to SI on load.
"""
import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from . import atmosphere as atm
from .dynamics import PathLimits
from .performance import AircraftModel, Envelope, load_aircraft, make_cost
from .wind import WindProfile


class ScenarioError(ValueError):
    """Scenario document fails validation."""


@dataclass(frozen=True)
class Boundary:
    v0: float  # initial TAS, m/s
    h0: float
    vf: float  # final TAS, m/s
    hf: float
    s_f: float  # terminal along-track position, m
    d_max: float  # cruise datum, m
    v_cas0: float
    v_casf: float


@dataclass(frozen=True)
class Scenario:
    name: str
    aircraft: AircraftModel
    wind: WindProfile
    cost_kind: str
    species: str | None
    boundary: Boundary
    limits: PathLimits
    envelope: Envelope

    def __post_init__(self):
        b = self.boundary
        if not b.h0 > b.hf:
            raise ScenarioError("initial altitude must be above final altitude")
        if not b.s_f > b.d_max:
            raise ScenarioError("terminal position must lie after d_max")
        if self.wind.max_cross() >= 0.9 * atm.tas_from_cas(self.envelope.v_min_cas, b.hf):
            raise ScenarioError("cross wind too strong for the speed envelope")
        if self.cost_kind == "emission" and self.species not in self.aircraft.ei_table:
            raise ScenarioError(f"aircraft has no emission table for {self.species}")

    @property
    def cruise_ground_speed(self):
        return float(self.wind.ground_speed(self.boundary.v0, self.boundary.h0))

    @property
    def cost(self):
        b = self.boundary
        return make_cost(self.aircraft, self.cost_kind, b.d_max, b.v0, b.h0,
                         self.cruise_ground_speed, species=self.species)

    def with_wind(self, wind, name=None):
        return replace(self, wind=wind, name=name or self.name)

    def with_cost(self, kind, species=None, name=None):
        return replace(self, cost_kind=kind, species=species, name=name or self.name)

    def validate_model(self):
        b = self.boundary
        self.aircraft.validate_envelope(b.hf, b.h0, self.envelope.v_min_cas, self.envelope.v_max_cas,
                                        self.envelope.m_min, self.envelope.m_max)


def make_boundary(v_cas0_kt, h0_ft, v_casf_kt, hf_ft, s_f_nm, d_max_nm):
    h0 = h0_ft * atm.FT
    hf = hf_ft * atm.FT
    v_cas0 = v_cas0_kt * atm.KT
    v_casf = v_casf_kt * atm.KT
    return Boundary(
        v0=float(atm.tas_from_cas(v_cas0, h0)),
        h0=h0,
        vf=float(atm.tas_from_cas(v_casf, hf)),
        hf=hf,
        s_f=s_f_nm * atm.NM,
        d_max=d_max_nm * atm.NM,
        v_cas0=v_cas0,
        v_casf=v_casf,
    )


def wind_from_records(records):
    if not records:
        return WindProfile.calm()
    recs = sorted(records, key=lambda r: r["h_ft"])
    return WindProfile(
        tuple(r["h_ft"] * atm.FT for r in recs),
        tuple(r.get("wh_kt", 0.0) * atm.KT for r in recs),
        tuple(r.get("wc_kt", 0.0) * atm.KT for r in recs),
    )


def wind_to_records(wind):
    return [
        {"h_ft": h / atm.FT, "wh_kt": wh / atm.KT, "wc_kt": wc / atm.KT}
        for h, wh, wc in zip(wind.altitudes, wind.wh, wind.wc)
    ]


def builtin_aircraft_path(name):
    return resources.files("descentopt") / "data" / "aircraft" / f"{name}.json"


def _resolve_aircraft(ref, base):
    p = Path(ref)
    if not p.is_absolute():
        cand = base / p
        if cand.exists():
            return load_aircraft(cand)
    if p.exists():
        return load_aircraft(p)
    builtin = builtin_aircraft_path(p.stem)
    if builtin.is_file():
        with resources.as_file(builtin) as fp:
            return load_aircraft(fp)
    raise ScenarioError(f"aircraft file not found: {ref}")


def scenario_from_dict(d, base=Path("."), aircraft=None):
    try:
        ac = aircraft if aircraft is not None else _resolve_aircraft(d["aircraft"], Path(base))
        bd = d["boundary"]
        boundary = make_boundary(bd["v_cas0_kt"], bd["h0_ft"], bd["v_casf_kt"], bd["hf_ft"],
                                 bd["s_f_nm"], bd["d_max_nm"])
        lim = d.get("limits", {})
        limits = PathLimits(
            gamma_min=math.radians(lim.get("gamma_min_deg", -6.0)),
            gamma_max=math.radians(lim.get("gamma_max_deg", 0.0)),
            rod_min=lim.get("rod_min", 2.54),
            rod_max=lim.get("rod_max", 25.0),
            level_allowed=lim.get("level_allowed", True),
        )
        env = ac.envelope
        if "envelope" in d:
            e = d["envelope"]
            env = Envelope(
                e.get("v_min_cas_kt", env.v_min_cas / atm.KT) * atm.KT,
                e.get("v_max_cas_kt", env.v_max_cas / atm.KT) * atm.KT,
                e.get("m_min", env.m_min),
                e.get("m_max", env.m_max),
            )
        cost = d.get("cost", {"kind": "fuel"})
        return Scenario(
            name=d.get("name", "scenario"),
            aircraft=ac,
            wind=wind_from_records(d.get("wind", [])),
            cost_kind=cost["kind"],
            species=cost.get("species"),
            boundary=boundary,
            limits=limits,
            envelope=env,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"invalid scenario: {exc}") from exc


def load_scenario(path, aircraft_path=None):
    path = Path(path)
    with open(path) as fh:
        d = json.load(fh)
    ac = load_aircraft(aircraft_path) if aircraft_path else None
    return scenario_from_dict(d, base=path.parent, aircraft=ac)


def builtin_scenario(name):
    ref = resources.files("descentopt") / "data" / "scenarios" / f"{name}.json"
    with resources.as_file(ref) as fp:
        return load_scenario(fp)


def builtin_scenario_names():
    ref = resources.files("descentopt") / "data" / "scenarios"
    return sorted(p.name[:-5] for p in ref.iterdir() if p.name.endswith(".json"))
