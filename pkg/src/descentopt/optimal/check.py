"""A-posteriori check of the necessary conditions along a synthesized trajectory.

Costates are taken from the closed-form expressions on singular and
boundary arcs. On bang arcs the altitude costate is integrated from its
value at the neighbouring junction, and the speed costate follows from
H = 0. The report lists every condition with its worst value and tolerance.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import atmosphere as atm
from ..dynamics import (IH, IT, IV, IX, admissible_gammas, constraint_scales, pure_state_constraints,
                        pure_state_partials)
from ..performance import TodRangeError, total_cost
from .conditions import (costates_on_arc, eta_a, gamma_s_residual, gamma_s_scale, glc_check,
                         hamiltonian, lambda_h_rate, switching)
from .generator import bang_gamma
from .trajectory import BANG_HIGH, BANG_LOW, BOUNDARY, SINGULAR

TOL_H = 1e-4
TOL_SINGULAR = 1e-6
TOL_ETA = -1e-9
TOL_ADJOINT = 1e-6
TOL_STATE = 1e-6
TOL_JUNCTION_SIGN = 1e-6
MIN_CONTROL_JUMP = 1e-6  # rad


@dataclass(frozen=True)
class CheckItem:
    name: str
    passed: bool
    worst: float
    tol: float
    detail: str = ""


@dataclass
class OptimalityReport:
    items: list[CheckItem]
    series: dict = field(default_factory=dict)  # per-sample arrays aligned with traj.samples

    @property
    def passed(self):
        return all(i.passed for i in self.items)

    def failures(self):
        return [i for i in self.items if not i.passed]

    def item(self, name):
        for i in self.items:
            if i.name == name:
                return i
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed, "checks": [asdict(i) for i in self.items]}


def _lam_h_along(arc, start_value, forward, ctx):
    """Integrate the altitude costate across the stored samples of a bang arc.

    Each interval restarts the state from the stored sample, so only the
    costate is propagated; RK4 over the interval uses the arc's control law.
    """
    s = arc.samples
    n = len(s)
    lam = np.empty(n)
    order = range(n - 1) if forward else range(n - 1, 0, -1)
    lam[0 if forward else n - 1] = start_value
    cost, wind, ac, lim = ctx.cost, ctx.wind, ctx.ac, ctx.lim

    def f(z):
        v, h, lh = z
        g = bang_gamma(arc.kind, v, lim)
        vdot = -ac.net_drag(v, h) / ac.mass - g * (atm.G0 + v * wind.wind_effect(v, h).whchi)
        rate, _ = lambda_h_rate(v, h, lh, g, cost, wind, ac)
        return np.array([vdot, v * g, float(rate)])

    for i in order:
        j = i + 1 if forward else i - 1
        dt = s[j, IT] - s[i, IT]
        z = np.array([s[i, IV], s[i, IH], lam[i]])
        k1 = f(z)
        k2 = f(z + 0.5 * dt * k1)
        k3 = f(z + 0.5 * dt * k2)
        k4 = f(z + dt * k3)
        lam[j] = (z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))[2]
    return lam


class _Ctx:
    def __init__(self, scenario):
        self.ac = scenario.aircraft
        self.wind = scenario.wind
        self.env = scenario.envelope
        self.lim = scenario.limits
        self.cost = scenario.cost


def _costates(traj, ctx):
    """Per-arc (lam_v, lam_h) arrays; None where no anchor could be found."""
    arcs = traj.arcs
    out = [None] * len(arcs)
    for k, a in enumerate(arcs):
        if a.kind in (SINGULAR, BOUNDARY):
            lv, _, lh = costates_on_arc(a.samples[:, IV], a.samples[:, IH], ctx.cost, ctx.wind, ctx.ac)
            out[k] = (np.atleast_1d(lv), np.atleast_1d(lh))
    progress = True
    while progress:
        progress = False
        for k, a in enumerate(arcs):
            if out[k] is not None:
                continue
            if k > 0 and out[k - 1] is not None:
                lh = _lam_h_along(a, out[k - 1][1][-1], True, ctx)
            elif k + 1 < len(arcs) and out[k + 1] is not None:
                lh = _lam_h_along(a, out[k + 1][1][0], False, ctx)
            else:
                continue
            g = a.gammas
            _, lv = lambda_h_rate(a.samples[:, IV], a.samples[:, IH], lh, g, ctx.cost, ctx.wind, ctx.ac)
            out[k] = (np.atleast_1d(lv), lh)
            progress = True
    return out


def check_optimality(traj, scenario, glc_stride=5):
    """Evaluate the necessary conditions along ``traj``.

    Tolerances are normalised by the cruise cost rate K_cr * V_cr; the speed
    and altitude costates enter as lam_V * g and lam_h * V_cr.
    """
    ctx = _Ctx(scenario)
    cost, wind, ac, env, lim = ctx.cost, ctx.wind, ctx.ac, ctx.env, ctx.lim
    scale = cost.scale
    gscale = gamma_s_scale(cost, ac)
    items = []
    lam = _costates(traj, ctx)

    missing = [a.label for a, c in zip(traj.arcs, lam) if c is None]
    items.append(CheckItem("costate_anchor", not missing, float(len(missing)), 0.0,
                           "no singular or boundary arc to anchor: " + ", ".join(missing) if missing else ""))

    # per-sample series
    ser = {k: [] for k in ("lam_v", "lam_x", "lam_h", "H", "H_gamma", "Gamma_s")}
    per_arc = []
    for a, c in zip(traj.arcs, lam):
        v, h, g = a.samples[:, IV], a.samples[:, IH], a.gammas
        lv, lh = c if c is not None else (np.full(len(v), np.nan), np.full(len(v), np.nan))
        ham = hamiltonian(v, h, lv, 0.0, lh, g, cost, wind, ac)
        hg = switching(v, h, lv, lh, wind)
        gs = gamma_s_residual(v, h, cost, wind, ac)
        per_arc.append((lv, lh, np.atleast_1d(ham), np.atleast_1d(hg), np.atleast_1d(gs)))
        for key, val in zip(("lam_v", "lam_x", "lam_h", "H", "H_gamma", "Gamma_s"),
                            (lv, np.zeros(len(v)), lh, ham, hg, gs)):
            ser[key].append(np.broadcast_to(np.atleast_1d(val), (len(v),)))
    series = {k: np.concatenate(v) for k, v in ser.items()}
    samples = traj.samples
    series["S"] = pure_state_constraints(samples[:, IV], samples[:, IH], env).T

    h_norm = np.nanmax(np.abs(series["H"])) / scale
    items.append(CheckItem("hamiltonian", bool(h_norm <= TOL_H), float(h_norm), TOL_H))
    items.append(CheckItem("lambda_x", True, 0.0, 0.0, "lam_x is identically zero (x_s absent from H)"))

    # bang arcs: sign of the switching function
    worst_bang = np.inf
    worst_end = np.inf
    bad = []
    njunction = len(traj.arcs) - 1
    for k, (a, pa) in enumerate(zip(traj.arcs, per_arc)):
        if a.kind not in (BANG_HIGH, BANG_LOW) or len(a.samples) < 2 or lam[k] is None:
            continue
        sgn = 1.0 if a.kind == BANG_LOW else -1.0
        signed = sgn * pa[3] / scale
        interior = np.ones(len(signed), dtype=bool)
        if k > 0:
            interior[0] = False
        if k < njunction:
            interior[-1] = False
        if interior.any():
            worst_bang = min(worst_bang, float(signed[interior].min()))
        if (~interior).any():
            worst_end = min(worst_end, float(signed[~interior].min()))
        if (interior.any() and signed[interior].min() <= 0.0) or \
                ((~interior).any() and signed[~interior].min() < -TOL_JUNCTION_SIGN):
            bad.append(a.label)
    detail = f"junction endpoints min {worst_end:.3e}" if np.isfinite(worst_end) else ""
    if bad:
        detail = "wrong sign on " + ", ".join(bad) + "; " + detail
    items.append(CheckItem("bang_switching_sign", not bad,
                           float(worst_bang) if np.isfinite(worst_bang) else 0.0, 0.0, detail))

    # singular arcs
    sing = [(a, pa) for a, pa in zip(traj.arcs, per_arc) if a.kind == SINGULAR]
    if sing:
        r = max(float(np.max(np.abs(pa[4]))) for _, pa in sing) / gscale
        items.append(CheckItem("singular_residual", r <= TOL_SINGULAR, r, TOL_SINGULAR))
        hg = max(float(np.max(np.abs(pa[3]))) for _, pa in sing) / scale
        items.append(CheckItem("singular_switching", hg <= TOL_SINGULAR, hg, TOL_SINGULAR))
        glc_max = -np.inf
        margin = np.inf
        for a, _ in sing:
            idx = sorted(set(range(0, len(a.samples), glc_stride)) | {len(a.samples) - 1})
            for i in idx:
                glc_max = max(glc_max, float(glc_check(a.samples[i, IV], a.samples[i, IH], cost, wind, ac)))
            for y, g in zip(a.samples, a.gammas):
                lo, hi, _ = admissible_gammas(y[IV], lim)
                margin = min(margin, g - lo, hi - g)
        items.append(CheckItem("glc", glc_max <= 0.0, glc_max, 0.0))
        items.append(CheckItem("singular_control_interior", margin > 0.0, float(margin), 0.0,
                               "smallest distance (rad) to the admissible interval ends"))

    # boundary arcs
    bnd = [a for a in traj.arcs if a.kind == BOUNDARY]
    if bnd:
        sa_max, eta_min, margin = 0.0, np.inf, np.inf
        scales = constraint_scales(env)
        for a in bnd:
            v, h = a.samples[:, IV], a.samples[:, IH]
            s_all = pure_state_constraints(v, h, env)
            sa_max = max(sa_max, float(np.max(np.abs(s_all[a.constraint]))) / scales[a.constraint])
            _, s_v, _ = pure_state_partials(v, h, env, a.constraint)
            eta = eta_a(v, h, a.constraint, a.gammas, cost, wind, ac, env)
            eta_min = min(eta_min, float(np.min(eta * np.abs(s_v) * atm.G0 / scale)))
            for y, g in zip(a.samples, a.gammas):
                lo, hi, _ = admissible_gammas(y[IV], lim)
                margin = min(margin, g - lo, hi - g)
        items.append(CheckItem("boundary_active", sa_max <= TOL_SINGULAR, sa_max, TOL_SINGULAR))
        items.append(CheckItem("eta_a", eta_min >= TOL_ETA, eta_min, TOL_ETA))
        items.append(CheckItem("boundary_mixed_inactive", margin > 0.0, float(margin), 0.0,
                               "mixed constraints strictly inactive on boundary arcs"))

    # junctions
    adj_worst, gap_worst = 0.0, 0.0
    jump_min = np.inf
    for k in range(njunction):
        a, b = traj.arcs[k], traj.arcs[k + 1]
        gap_worst = max(gap_worst, traj.junctions[k].gap)
        if lam[k] is not None and lam[k + 1] is not None:
            dlv = abs(lam[k][0][-1] - lam[k + 1][0][0]) * atm.G0 / scale
            dlh = abs(lam[k][1][-1] - lam[k + 1][1][0]) * cost.v_cr / scale
            adj_worst = max(adj_worst, float(dlv), float(dlh))
        kinds = {a.kind, b.kind}
        if SINGULAR in kinds and len(kinds) == 2:
            jump_min = min(jump_min, abs(float(a.gammas[-1] - b.gammas[0])))
    items.append(CheckItem("adjoint_continuity", adj_worst <= TOL_ADJOINT, adj_worst, TOL_ADJOINT))
    items.append(CheckItem("state_continuity", gap_worst <= TOL_STATE, gap_worst, TOL_STATE))
    if np.isfinite(jump_min):
        items.append(CheckItem("control_jump_at_singular_junction", jump_min > MIN_CONTROL_JUMP,
                               float(jump_min), MIN_CONTROL_JUMP, "first-order singular arc entered with a jump"))

    # feasibility and boundary conditions
    s_norm = float(np.max(series["S"] / constraint_scales(env)))
    items.append(CheckItem("state_constraints", s_norm <= TOL_STATE, s_norm, TOL_STATE))
    worst_omega = 0.0
    for y, g in zip(samples, traj.gammas):
        lo, hi, level = admissible_gammas(y[IV], lim)
        if level and g == 0.0:
            continue
        worst_omega = max(worst_omega, lo - g, g - hi)
    items.append(CheckItem("control_admissible", worst_omega <= 1e-12, float(worst_omega), 1e-12))
    b = scenario.boundary
    y0, yf = samples[0], samples[-1]
    bc = max(abs(y0[IV] - b.v0) / b.v0, abs(y0[IH] - b.h0) / b.h0,
             abs(yf[IV] - b.vf) / b.vf, abs(yf[IH] - b.hf) / b.hf, abs(yf[IX] - b.s_f) / abs(b.s_f))
    items.append(CheckItem("boundary_conditions", bc <= TOL_STATE, float(bc), TOL_STATE))
    try:
        total_cost(traj, cost)
        items.append(CheckItem("cost_forms_agree", True, 0.0, 1e-8))
    except (AssertionError, TodRangeError) as exc:
        items.append(CheckItem("cost_forms_agree", False, float("nan"), 1e-8, str(exc)))
    return OptimalityReport(items, series)
