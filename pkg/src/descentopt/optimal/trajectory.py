"""Arc and trajectory containers."""
from dataclasses import dataclass, field

import numpy as np

from .. import atmosphere as atm
from ..dynamics import IF, IH, INTEGRALS, IT, IV, IX, State

BANG_HIGH = "bang_high"
BANG_LOW = "bang_low"
SINGULAR = "singular"
BOUNDARY = "boundary"
ARC_KINDS = (BANG_HIGH, BANG_LOW, SINGULAR, BOUNDARY)
CONSTRAINT_NAMES = ("cas_max", "cas_min", "mach_max", "mach_min")


@dataclass
class Arc:
    kind: str
    samples: np.ndarray  # (n, NY), forward time order
    gammas: np.ndarray  # (n,)
    constraint: int | None = None

    @property
    def label(self):
        if self.kind == BOUNDARY:
            return f"{BOUNDARY}:{CONSTRAINT_NAMES[self.constraint]}"
        return self.kind

    @property
    def duration(self):
        return float(self.samples[-1, IT] - self.samples[0, IT])

    def states(self):
        return [State.from_vector(y) for y in self.samples]


@dataclass(frozen=True)
class Junction:
    t: float
    kinds: tuple[str, str]
    state: State
    gap: float  # largest relative state mismatch between the joined arcs


@dataclass
class Trajectory:
    arcs: list[Arc]
    junctions: list[Junction]
    cost_value: float = float("nan")
    cruise: dict = field(default_factory=dict)  # cruise-segment totals from d_max to TOD
    meta: dict = field(default_factory=dict)

    @property
    def samples(self):
        return np.concatenate([a.samples for a in self.arcs])

    @property
    def gammas(self):
        return np.concatenate([a.gammas for a in self.arcs])

    @property
    def initial(self):
        return State.from_vector(self.arcs[0].samples[0])

    @property
    def terminal(self):
        return State.from_vector(self.arcs[-1].samples[-1])

    @property
    def tod_x(self):
        return self.initial.x

    @property
    def descent_time(self):
        return self.terminal.t - self.initial.t

    @property
    def arrival_time(self):
        """Time from the cruise datum d_max to the meter fix."""
        return self.cruise.get("time", 0.0) + self.descent_time

    def integral(self, name):
        i = INTEGRALS[name]
        return float(self.arcs[-1].samples[-1, i] - self.arcs[0].samples[0, i])

    @property
    def structure(self):
        return [a.label for a in self.arcs if len(a.samples) > 1]

    def total(self, name):
        """Descent integral plus the cruise share from d_max (fuel kg or emissions g)."""
        return self.cruise.get(name, 0.0) + self.integral(name)

    def summary(self):
        out = {
            "tod_nm": self.tod_x / atm.NM,
            "ta_s": self.arrival_time,
            "descent_time_s": self.descent_time,
            "fuel_kg": self.total("fuel"),
            "cost": self.cost_value,
            "structure": self.structure,
        }
        for sp in ("NOx", "CO", "HC"):
            if sp in self.cruise:
                out[f"{sp.lower()}_g"] = self.total(sp)
        return out

    def cas_profile(self):
        s = self.samples
        return s[:, IH], atm.cas_from_tas(s[:, IV], s[:, IH])

    def x_profile(self):
        s = self.samples
        return s[:, IX]


def descent_fuel(traj):
    return float(traj.arcs[-1].samples[-1, IF] - traj.arcs[0].samples[0, IF])
