"""Coarse-grid dynamic-programming optimum of the descent problem.

Along-track distance is the stage variable. Each stage advances the state
by ``ds`` metres with a Heun step, so transitions do not depend on the
stage and are tabulated once. The cost-to-go is interpolated bilinearly in
(V_T, h). Because the top of descent is free and the dynamics do not
depend on the along-track position, the cost-to-go is stationary.
"""
from dataclasses import dataclass

import numpy as np

from . import atmosphere as atm
from .dynamics import speed_window
from .performance import k_des

BIG = 1e20  # cost-to-go of nodes that cannot reach the meter fix
INFEASIBLE = 1e15


class OracleInfeasible(RuntimeError):
    """The terminal node cannot be reached from the initial node on this grid."""


@dataclass(frozen=True)
class GridSpec:
    n_h: int
    n_v: int
    n_gamma: int = 21
    ds: float | None = None  # along-track step, m; default ties it to the altitude spacing
    h_range: tuple | None = None
    v_range: tuple | None = None

    def __post_init__(self):
        if min(self.n_h, self.n_v, self.n_gamma) < 2:
            raise ValueError("grid counts must be at least 2")

    @classmethod
    def parse(cls, text):
        """Parse ``"NHxNVxNG"``."""
        parts = text.lower().split("x")
        if len(parts) != 3:
            raise ValueError(f"grid must look like 400x200x21, got {text!r}")
        n_h, n_v, n_g = (int(p) for p in parts)
        return cls(n_h, n_v, n_g)

    def refined(self, factor=2):
        return GridSpec(self.n_h * factor, self.n_v * factor, self.n_gamma,
                        None if self.ds is None else self.ds / factor, self.h_range, self.v_range)


@dataclass
class DPResult:
    cost: float
    tod_x: float
    path: np.ndarray  # columns: x_s, V_T, h, gamma
    grid: GridSpec
    ds: float
    n_stages: int


def _field(v, h, gamma, ac, wind, cost):
    """Derivatives with respect to along-track distance and the running cost per metre."""
    eff = wind.wind_effect(v, h)
    gs = eff.c * v + eff.wh
    vdot = -ac.net_drag(v, h) / ac.mass - gamma * (atm.G0 + v * eff.whchi)
    return vdot / gs, v * gamma / gs, k_des(cost, ac, v, h) / gs - cost.k_cr


def _controls(v, limits, n_gamma):
    """``n_gamma - 1`` samples of the descending interval plus level flight, per speed."""
    lo = np.maximum(limits.gamma_min, -limits.rod_max / v)
    hi = np.minimum(limits.gamma_max, -limits.rod_min / v)
    frac = np.linspace(0.0, 1.0, n_gamma - 1)
    g = lo[..., None] + (hi - lo)[..., None] * frac
    g = np.where((hi >= lo)[..., None], g, 0.0)
    return np.concatenate([g, np.zeros(v.shape + (1,))], axis=-1)


class _Grid:
    def __init__(self, scenario, grid):
        b = scenario.boundary
        env = scenario.envelope
        self.h_lo, self.h_hi = grid.h_range or (b.hf, b.h0)
        if grid.v_range:
            self.v_lo, self.v_hi = grid.v_range
        else:
            hs = np.linspace(self.h_lo, self.h_hi, 64)
            win = np.array([speed_window(h, env)[:2] for h in hs])
            self.v_lo, self.v_hi = float(win[:, 0].min()), float(win[:, 1].max())
        self.vg = np.linspace(self.v_lo, self.v_hi, grid.n_v)
        self.hg = np.linspace(self.h_lo, self.h_hi, grid.n_h)
        self.dv = self.vg[1] - self.vg[0]
        self.dh = self.hg[1] - self.hg[0]
        self.n_v, self.n_h = grid.n_v, grid.n_h
        hh, vv = np.meshgrid(self.hg, self.vg, indexing="ij")
        self.v, self.h = vv.ravel(), hh.ravel()
        lo = np.array([speed_window(h, env)[0] for h in self.hg])
        hi = np.array([speed_window(h, env)[1] for h in self.hg])
        self.win_lo, self.win_hi = lo, hi
        self.feasible = (vv >= lo[:, None] - 1e-9) & (vv <= hi[:, None] + 1e-9)
        self.feasible = self.feasible.ravel()

    def inside(self, v, h):
        lo = np.interp(h, self.hg, self.win_lo)
        hi = np.interp(h, self.hg, self.win_hi)
        return (h >= self.h_lo - 1e-6) & (h <= self.h_hi + 1e-6) & (v >= lo - 1e-9) & (v <= hi + 1e-9)

    def stencil(self, v, h):
        """Corner node indices and bilinear weights for points (v, h)."""
        fv = np.clip((v - self.v_lo) / self.dv, 0.0, self.n_v - 1 - 1e-9)
        fh = np.clip((h - self.h_lo) / self.dh, 0.0, self.n_h - 1 - 1e-9)
        iv, ih = np.floor(fv).astype(np.int64), np.floor(fh).astype(np.int64)
        tv, th = fv - iv, fh - ih
        base = ih * self.n_v + iv
        idx = np.stack([base, base + 1, base + self.n_v, base + self.n_v + 1], axis=-1)
        w = np.stack([(1 - tv) * (1 - th), tv * (1 - th), (1 - tv) * th, tv * th], axis=-1)
        return idx, w

    def interp(self, values, v, h):
        idx, w = self.stencil(np.asarray(v, dtype=float), np.asarray(h, dtype=float))
        return _blend(values[idx], w)


def _blend(corner_values, w):
    """Bilinear blend; any unreachable corner with positive weight makes the point unreachable."""
    return np.minimum((corner_values * w).sum(-1), BIG)


def dp_solve(scenario, grid, tol=1e-10):
    """Value iteration for the minimum cost from the initial node to the meter fix.

    The dynamics do not depend on the along-track position and the top of
    descent is free, so the problem is a stationary shortest path: nodes near
    the meter-fix state are absorbing with value zero at every stage. The
    iteration runs until the values settle or the number of stages reaches
    the range between d_max and the meter fix.

    Returns:
        DPResult with the total cost (same definition as the synthesized
        trajectory's ``cost_value``), the TOD estimate and a replayed path.

    Raises:
        OracleInfeasible: if the initial node cannot reach the meter fix.
    """
    ac, wind, lim = scenario.aircraft, scenario.wind, scenario.limits
    cost = scenario.cost
    b = scenario.boundary
    g = _Grid(scenario, grid)
    ds = grid.ds or 20.0 * g.dh
    n_stages = int(np.floor((b.s_f - b.d_max) / ds))

    gam = _controls(g.v, lim, grid.n_gamma)  # (N, C)
    v = np.repeat(g.v[:, None], gam.shape[1], axis=1)
    h = np.repeat(g.h[:, None], gam.shape[1], axis=1)
    k1v, k1h, l1 = _field(v, h, gam, ac, wind, cost)
    vp, hp = v + ds * k1v, np.maximum(h + ds * k1h, 0.0)
    k2v, k2h, l2 = _field(vp, hp, gam, ac, wind, cost)
    vn = v + 0.5 * ds * (k1v + k2v)
    hn = h + 0.5 * ds * (k1h + k2h)
    ok = g.inside(vn, hn) & g.feasible[:, None]
    stage_cost = np.where(ok, 0.5 * ds * (l1 + l2), BIG)
    idx, w = g.stencil(vn, hn)

    capture = _capture(g, b)
    values = np.where(capture, 0.0, BIG)
    pol = np.full(len(values), -1)
    steps = 0
    for steps in range(1, n_stages + 1):
        cand = _blend(values[idx], w) + stage_cost
        new_pol = np.argmin(cand, axis=1)
        new = np.minimum(cand[np.arange(len(new_pol)), new_pol], BIG)
        new = np.where(capture, np.minimum(new, 0.0), new)
        pol = np.where(new < values, new_pol, pol)
        done = np.max(np.abs(np.where(new < INFEASIBLE, new - values, 0.0))) <= tol * cost.scale * ds
        changed = np.any((new < INFEASIBLE) != (values < INFEASIBLE))
        values = new
        if done and not changed:
            break
    j0 = float(g.interp(values, b.v0, b.h0))
    if not j0 < INFEASIBLE:
        raise OracleInfeasible("meter fix unreachable from the initial state on this grid")

    path = _replay(g, pol, gam, capture, b, ds, n_stages, ac, wind, cost, lim)
    tod = b.s_f - (path[-1, 0] - path[0, 0])
    path[:, 0] += tod - path[0, 0]
    total = cost.k_cr * (b.s_f - b.d_max) + j0
    return DPResult(float(total), float(tod), path, grid, float(ds), steps)


def _capture(g, b):
    """Nodes within one cell of the meter-fix state."""
    return (np.abs(g.v - b.vf) <= g.dv * (1 + 1e-9)) & (np.abs(g.h - b.hf) <= g.dh * (1 + 1e-9))


def _replay(g, pol, gam, capture, b, ds, n_stages, ac, wind, cost, lim):
    """Nearest-node replay of the stationary policy from the initial state.

    Stops on entering the capture box around the meter fix.
    """
    v, h, x = b.v0, b.h0, 0.0
    rows = []
    for _ in range(n_stages):
        iv = int(np.clip(round((v - g.v_lo) / g.dv), 0, g.n_v - 1))
        ih = int(np.clip(round((h - g.h_lo) / g.dh), 0, g.n_h - 1))
        node = ih * g.n_v + iv
        if capture[node] or pol[node] < 0:
            break
        gamma = float(gam[node, pol[node]])
        if gamma != 0.0:
            # the node's control, clipped into the admissible interval at the actual speed
            gamma = float(np.clip(gamma, max(lim.gamma_min, -lim.rod_max / v), min(lim.gamma_max, -lim.rod_min / v)))
        rows.append((x, v, h, gamma))
        k1v, k1h, _ = _field(v, h, gamma, ac, wind, cost)
        k2v, k2h, _ = _field(v + ds * k1v, max(h + ds * k1h, 0.0), gamma, ac, wind, cost)
        v = float(v + 0.5 * ds * (k1v + k2v))
        h = float(max(h + 0.5 * ds * (k1h + k2h), b.hf))
        x += ds
    rows.append((x, v, h, 0.0))
    return np.array(rows)


@dataclass(frozen=True)
class Comparison:
    cost_gen: float
    cost_dp: float
    rel_cost_gap: float  # (dp - gen) / |gen|
    tod_gap: float  # m, dp - gen
    max_cas_dev: float  # m/s over the common altitude band

    def to_dict(self):
        return {
            "cost_gen": self.cost_gen,
            "cost_dp": self.cost_dp,
            "rel_cost_gap": self.rel_cost_gap,
            "tod_gap_nm": self.tod_gap / atm.NM,
            "max_cas_dev_kt": self.max_cas_dev / atm.KT,
        }


def _cas_vs_h(v, h, hq):
    """CAS at altitudes ``hq`` along a descending path (first pass through each altitude)."""
    order = np.argsort(h, kind="stable")
    hs, vs = h[order], v[order]
    keep = np.concatenate([[True], np.diff(hs) > 1e-9])
    return np.interp(hq, hs[keep], atm.cas_from_tas(vs[keep], hs[keep]))


def compare(traj, dp, n_alt=60):
    """Cost, TOD and speed-profile differences between a trajectory and a DP result."""
    s = traj.samples
    h_lo, h_hi = s[:, 1].min(), s[:, 1].max()
    band = np.linspace(h_lo + 0.05 * (h_hi - h_lo), h_hi - 0.05 * (h_hi - h_lo), n_alt)
    cas_gen = _cas_vs_h(s[:, 0], s[:, 1], band)
    cas_dp = _cas_vs_h(dp.path[:, 1], dp.path[:, 2], band)
    return Comparison(
        cost_gen=float(traj.cost_value),
        cost_dp=float(dp.cost),
        rel_cost_gap=float((dp.cost - traj.cost_value) / abs(traj.cost_value)),
        tod_gap=float(dp.tod_x - traj.tod_x),
        max_cas_dev=float(np.max(np.abs(cas_dp - cas_gen))),
    )


