"""Four-step synthesis of the optimal idle descent.

1. Locate the singular locus (or the envelope bound that replaces it).
2. Integrate forward from the initial state with the bang control that
   moves the state toward the locus.
3. Integrate backward from the meter fix in the same way.
4. Integrate backward from the step-3 junction along the locus, on
   singular and boundary arcs, up to the step-2 junction altitude.
"""

import numpy as np

from .. import atmosphere as atm
from ..dynamics import (IH, IT, IV, IX, NoJunctionError, State, admissible_gammas,
                        integrate, make_rhs, speed_window)
from ..performance import total_cost
from .conditions import boundary_gamma, gamma_s_partials, singular_control
from .singular import SingularLocus
from .trajectory import BANG_HIGH, BANG_LOW, BOUNDARY, SINGULAR, Arc, Junction, Trajectory


MAX_SEGMENTS = 24


class SynthesisError(RuntimeError):
    """The bang arcs cannot be connected through the locus."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


def bang_gamma(kind, v, limits):
    if kind == BANG_HIGH:
        return 0.0
    return admissible_gammas(v, limits)[0]


def bound_speed(h, envelope, index):
    """True airspeed on pure state constraint ``index`` at altitude ``h``."""
    if index == 0:
        return float(atm.tas_from_cas(envelope.v_max_cas, h))
    if index == 1:
        return float(atm.tas_from_cas(envelope.v_min_cas, h))
    if index == 2:
        return float(atm.tas_from_mach(envelope.m_max, h))
    return float(atm.tas_from_mach(envelope.m_min, h))


class _Synth:
    def __init__(self, scenario, step):
        self.sc = scenario
        self.ac = scenario.aircraft
        self.wind = scenario.wind
        self.env = scenario.envelope
        self.lim = scenario.limits
        self.cost = scenario.cost
        self.step = step
        self.locus = SingularLocus(self.cost, self.wind, self.ac, self.env)
        self.trace = []

    def rhs(self, control):
        return make_rhs(self.ac, self.wind, self.cost, control)

    def gap(self, y):
        return y[IV] - self.locus(y[IH]).v

    # -- control laws -------------------------------------------------------

    def bang_law(self, kind):
        lim = self.lim
        return lambda y: bang_gamma(kind, y[IV], lim)

    def singular_law(self, y):
        return float(singular_control(y[IV], y[IH], self.cost, self.wind, self.ac))

    def boundary_law(self, index):
        return lambda y: float(boundary_gamma(y[IV], y[IH], index, self.wind, self.ac, self.env))

    def project_singular(self, y):
        g, g_v, _ = gamma_s_partials(y[IV], y[IH], self.cost, self.wind, self.ac)
        y = y.copy()
        y[IV] -= float(g) / float(g_v)
        return y

    def project_boundary(self, index):
        def project(y):
            y = y.copy()
            y[IV] = bound_speed(y[IH], self.env, index)
            return y
        return project

    # -- steps 2 and 3 ------------------------------------------------------

    def bang_to_locus(self, y0, direction, h_stop):
        """Bang arc from ``y0`` to the locus; returns (kind, samples)."""
        gap0 = self.gap(y0)
        if abs(gap0) <= 1e-9 * y0[IV]:
            return BANG_HIGH, y0[None, :].copy()
        if direction > 0:
            # forward from the initial state: above the locus decelerate level, below dive
            kind = BANG_HIGH if gap0 > 0 else BANG_LOW
        else:
            # backward from the meter fix: below the locus the last arc decelerates level
            kind = BANG_HIGH if gap0 < 0 else BANG_LOW
        events = [self.gap, lambda y: y[IH] - h_stop]
        try:
            res = integrate(y0, self.rhs(self.bang_law(kind)), events, direction, self.step)
        except NoJunctionError as exc:
            raise SynthesisError(f"{kind} arc never reaches the locus: {exc}", self.trace) from exc
        if res.event != 0:
            raise SynthesisError(f"{kind} arc leaves the altitude range before reaching the locus", self.trace)
        self.trace.append(f"{'forward' if direction > 0 else 'backward'} {kind}: "
                          f"{len(res.samples)} samples, ends V={res.samples[-1, IV]:.4f} h={res.samples[-1, IH]:.2f}")
        return kind, res.samples

    # -- step 4 -------------------------------------------------------------

    def follow_locus(self, y_start, h_target):
        """Backward integration along the locus up to ``h_target``.

        Returns a list of (kind, constraint, samples) in backward order.
        """
        segs = []
        y = y_start.copy()
        env = self.env
        stop = lambda y: y[IH] - h_target  # noqa: E731
        for _ in range(MAX_SEGMENTS):
            pt = self.locus(y[IH])
            if pt.kind == SINGULAR:
                rhs = self.rhs(self.singular_law)
                project = self.project_singular
                events = [
                    stop,
                    lambda y: y[IV] - speed_window(y[IH], env)[0],
                    lambda y: speed_window(y[IH], env)[1] - y[IV],
                ]
                y = project(y)
            else:
                idx = pt.constraint
                rhs = self.rhs(self.boundary_law(idx))
                project = self.project_boundary(idx)
                lower = idx in (1, 3)

                def crossover(y, lower=lower):
                    h = y[IH]
                    if lower:
                        return atm.tas_from_cas(env.v_min_cas, h) - atm.tas_from_mach(env.m_min, h)
                    return atm.tas_from_cas(env.v_max_cas, h) - atm.tas_from_mach(env.m_max, h)

                events = [stop, lambda y: self.locus.residual(y[IV], y[IH]), crossover]
                y = project(y)
            try:
                res = integrate(y, rhs, events, -1, self.step, project=project)
            except NoJunctionError as exc:
                raise SynthesisError(f"locus integration stalled: {exc}", self.trace) from exc
            self.trace.append(f"backward {pt.kind}{'' if pt.constraint is None else f':{pt.constraint}'}: "
                              f"{len(res.samples)} samples, ends h={res.samples[-1, IH]:.2f} (event {res.event})")
            segs.append((pt.kind, pt.constraint, res.samples))
            y = res.samples[-1]
            if res.event == 0:
                return segs
        raise SynthesisError("too many arc switches along the locus", self.trace)


def _arc_gammas(kind, constraint, samples, synth):
    out = np.empty(len(samples))
    for i, y in enumerate(samples):
        if kind in (BANG_HIGH, BANG_LOW):
            out[i] = bang_gamma(kind, y[IV], synth.lim)
        elif kind == SINGULAR:
            out[i] = synth.singular_law(y)
        else:
            out[i] = boundary_gamma(y[IV], y[IH], constraint, synth.wind, synth.ac, synth.env)
    return out


def _rel_gap(a, b):
    return max(abs(a[IV] - b[IV]) / max(abs(b[IV]), 1.0), abs(a[IH] - b[IH]) / max(abs(b[IH]), 1.0))


def generate_trajectory(scenario, step=0.5):
    """Synthesize the optimal descent for ``scenario``.

    Raises:
        SynthesisError: if the bang arcs and the locus do not connect.
    """
    synth = _Synth(scenario, step)
    b = scenario.boundary
    y0 = State(b.v0, b.h0, 0.0, 0.0).vector()
    head = [synth.bang_to_locus(y0, +1, b.hf)]
    return _complete(synth, head)


def overshoot_trajectory(scenario, dv, step=0.5):
    """Deliberately suboptimal descent for exercising the checker.

    The initial level deceleration continues ``dv`` m/s past the locus
    speed, then a steepest-descent arc brings the state back to the locus;
    the remainder is synthesized as usual.
    """
    synth = _Synth(scenario, step)
    b = scenario.boundary
    y0 = State(b.v0, b.h0, 0.0, 0.0).vector()
    target = synth.locus(b.h0).v - dv
    res = integrate(y0, synth.rhs(synth.bang_law(BANG_HIGH)), [lambda y: y[IV] - target], +1, step)
    _, dive = synth.bang_to_locus(res.samples[-1], +1, b.hf)
    return _complete(synth, [(BANG_HIGH, res.samples), (BANG_LOW, dive)])


def _complete(synth, head):
    """Attach steps 3 and 4 to the forward ``head`` arcs and assemble the trajectory."""
    scenario = synth.sc
    b = scenario.boundary
    s2 = head[-1][1]
    yf = State(b.vf, b.hf, b.s_f, 0.0).vector()
    kind3, s3 = synth.bang_to_locus(yf, -1, b.h0)
    h2, h3 = s2[-1, IH], s3[-1, IH]
    if h3 > h2 + 1e-6:
        raise SynthesisError(f"initial and final bang arcs overlap in altitude ({h2:.1f} m < {h3:.1f} m)", synth.trace)

    segs = synth.follow_locus(s3[-1], h2) if h2 - h3 > 1e-6 else []

    # forward-ordered arcs; step-3/4 samples already carry terminal-anchored bookkeeping
    arcs = []
    for kind, idx, s in reversed(segs):
        s = s[::-1].copy()
        arcs.append(Arc(kind, s, _arc_gammas(kind, idx, s, synth), idx))
    s3f = s3[::-1].copy()
    tail = Arc(kind3, s3f, _arc_gammas(kind3, None, s3f, synth))
    first_next = arcs[0].samples[0] if arcs else s3f[0]
    lead = []
    for kind, s in reversed(head):
        s = s.copy()
        s[:, IX:] += first_next[IX:] - s[-1, IX:]
        lead.insert(0, Arc(kind, s, _arc_gammas(kind, None, s, synth)))
        first_next = s[0]
    arcs = lead + arcs + [tail]

    # re-anchor time and running integrals at the top of descent
    origin = arcs[0].samples[0].copy()
    for a in arcs:
        a.samples[:, IT:] -= origin[IT:]

    junctions = []
    for left, right in zip(arcs[:-1], arcs[1:]):
        ya, yb = left.samples[-1], right.samples[0]
        junctions.append(Junction(float(yb[IT]), (left.label, right.label), State.from_vector(yb), _rel_gap(ya, yb)))

    traj = Trajectory(arcs, junctions)
    _attach_totals(traj, scenario, synth.cost)
    traj.meta["trace"] = synth.trace
    traj.meta["scenario"] = scenario.name
    return traj


def _attach_totals(traj, scenario, cost):
    ac = scenario.aircraft
    b = scenario.boundary
    dist = traj.tod_x - b.d_max
    v_cr = scenario.cruise_ground_speed
    t_cr = dist / v_cr
    fuel = ac.cruise_fuel_flow * t_cr
    cruise = {"time": t_cr, "distance": dist, "fuel": fuel, "k_des": 0.0, "ground": 0.0}
    for sp in ac.ei_table:
        ei = float(ac.emission_index(sp, b.v0, b.h0, fuel_flow=ac.cruise_fuel_flow))
        cruise[sp] = ei * fuel
    traj.cruise = cruise
    traj.cost_value = total_cost(traj, cost)[0]
    traj.meta["k_cr"] = cost.k_cr
    traj.meta["cost_scale"] = cost.scale


def bang_control(kind, limits):
    """Feedback law for a bang arc, usable with :func:`descentopt.dynamics.make_rhs`."""
    return lambda y: bang_gamma(kind, y[IV], limits)

