"""Reduced Ricci flow on a fixed radial grid, with singularity diagnostics.

The metric coefficients evolve at fixed coordinate r:

    b_t = b_ss + (c_s/c + b_s/b) b_s + 2 c^2/b^3 - 4/b
    c_t = c_ss + 2 b_s c_s / b - 2 c^3/b^4
    a_t = a (2 b_ss/b + c_ss/c)

with arclength derivatives d/ds = (1/a) d/dr.  The lapse equation is the
(e0,e0) trace of -2 Ric in this gauge.  At a bolt axis the singular
quotients have the limits (c_s/c) b_s -> b_ss and c_ss/c -> c_sss/c_s;
both are evaluated with parity-consistent stencils.  The outermost node is
frozen to its initial data (the exterior is a fixed Ricci-flat background
up to curvature decay).

Time stepping is explicit Heun (second order) under the parabolic bound
dt = cfl * min(a dr)^2, with rejection and halving on positivity or
finiteness failures.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grids import EVEN, ODD, RadialOps, cumulative_arclength
from .profile import (InvalidProfileError, Profile, Topology, curvature,
                      derivatives, mass)

MONITOR_COLUMNS = ("t", "dt", "max_rm", "bolt_size", "mass", "u_max",
                   "min_bs", "min_cs", "c2rm_max", "type_one_ratio",
                   "nut_residual",
                   # extrema traces consumed by the invariant suite
                   "max_bs", "max_cs", "fminus_min", "fplus_max",
                   "ext_max_rm", "c_tv_max", "min_b2rm")


class SolverStallError(RuntimeError):
    pass


class AxisRegularityError(RuntimeError):
    pass


class NoSingularityError(RuntimeError):
    pass


class StructuralViolationError(RuntimeError):
    pass


@dataclass
class BlowupReport:
    T_hat: float
    type_one_sup: float
    blowup_R: float
    rescaled_u_distance: float
    threshold: float
    interval_is_initial: bool


@dataclass
class FlowState:
    profile: Profile
    t: float
    dt: float = 0.0
    step_index: int = 0
    T_hat: Optional[float] = None
    history: list = field(default_factory=list)
    c_tv: Optional[np.ndarray] = None   # running total variation of c(r, .)

    def copy_shallow(self):
        tv = None if self.c_tv is None else self.c_tv.copy()
        return FlowState(profile=self.profile, t=self.t, dt=self.dt,
                         step_index=self.step_index, T_hat=self.T_hat,
                         history=list(self.history), c_tv=tv)


class FlowOps:
    """Derivative operators and rhs bound to one grid and topology.

    Bolt flows run in the spec gauge: fixed coordinate grid, free lapse.
    Nut flows run radially regauged: the lapse is pinned to one and the
    warpings evolve by the arclength-form equations, which differs from
    Ricci flow by the radial diffeomorphism generated by the integrated
    lapse rate (a DeTurck-type gauge fixing).  The free-lapse gauge is
    unusable at a nut: its reparametrization sector grows like 2a/(s c),
    i.e. 1/s^2 at an axis where both warpings collapse linearly, which no
    resolution survives (and letting the mesh follow arclength instead
    feeds the same growth back through the transport velocity).  Every
    monitored quantity is a profile-level invariant, so the regauging is
    invisible to the diagnostics.
    """

    def __init__(self, r, topology: Topology):
        self.pin_lapse = topology is Topology.NUT
        self.ops = RadialOps(r, compact_axis=not self.pin_lapse)
        self.r = self.ops.r
        self.topology = topology
        self.pb, self.pc = (ODD, ODD) if topology is Topology.NUT else (EVEN, ODD)

    def check_gauge(self, a):
        if self.pin_lapse and np.max(np.abs(a - 1.0)) > 1e-12:
            raise InvalidProfileError(
                "nut flows run radially regauged and need unit-lapse input; "
                "resample to arclength first")

    def rhs(self, a, b, c):
        ops = self.ops
        ar = ops.d1(a, EVEN)
        br = ops.d1(b, self.pb)
        cr = ops.d1(c, self.pc)
        brr = ops.d2(b, self.pb)
        crr = ops.d2(c, self.pc)
        bs = br / a
        cs = cr / a
        bss = brr / a**2 - br * ar / a**3
        css = crr / a**2 - cr * ar / a**3
        n = a.size
        at = np.zeros(n)
        bt = np.zeros(n)
        ct = np.zeros(n)
        i = slice(1, n - 1)
        bt[i] = (bss[i] + (cs[i] / c[i] + bs[i] / b[i]) * bs[i]
                 + 2 * c[i] ** 2 / b[i] ** 3 - 4 / b[i])
        ct[i] = css[i] + 2 * bs[i] * cs[i] / b[i] - 2 * c[i] ** 3 / b[i] ** 4
        at[i] = a[i] * (2 * bss[i] / b[i] + css[i] / c[i])
        hs = a[0] * (self.r[1] - self.r[0])
        if self.topology is Topology.BOLT:
            # c pinned at 0; singular quotients by parity limits
            bss0 = 2 * (b[1] - b[0]) / hs**2
            cssoc0 = (c[2] - 2 * c[1]) / (hs**2 * c[1])
            bt[0] = 2 * bss0 - 4 / b[0]
            at[0] = a[0] * (2 * bss0 / b[0] + cssoc0)
        if self.pin_lapse:
            at[:] = 0.0
        bt[-1] = ct[-1] = at[-1] = 0.0
        return at, bt, ct


def stable_dt(r, a, cfl):
    return cfl * float(np.min(a[:-1] * np.diff(r))) ** 2


def _admissible(a, b, c, topology):
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        return False
    if np.any(a <= 0):
        return False
    if topology is Topology.BOLT:
        return bool(np.all(b > 0) and np.all(c[1:] > 0))
    return bool(np.all(b[1:] > 0) and np.all(c[1:] > 0))


def step(state: FlowState, fops: FlowOps, cfl=0.2, max_halvings=40) -> FlowState:
    """One accepted SSPRK3 step; halves dt on positivity/NaN rejection.

    Third order Shu-Osher stages; the stability region covers the
    imaginary axis up to sqrt(3), which the near-axis advection needs
    (two-stage schemes are unconditionally unstable on those modes).
    """
    p = state.profile
    a, b, c = p.a, p.b, p.c
    dt = stable_dt(fops.r, a, cfl)
    if dt <= 0 or not np.isfinite(dt):
        raise SolverStallError("stability bound degenerate")
    at, bt, ct = fops.rhs(a, b, c)
    if not np.all(np.isfinite(bt[1:-1])) or not np.all(np.isfinite(ct[1:-1])):
        raise AxisRegularityError("rhs not finite; parity data inconsistent")
    for _ in range(max_halvings):
        a1 = a + dt * at
        b1 = b + dt * bt
        c1 = c + dt * ct
        if _admissible(a1, b1, c1, p.topology):
            at2, bt2, ct2 = fops.rhs(a1, b1, c1)
            a2 = 0.75 * a + 0.25 * (a1 + dt * at2)
            b2 = 0.75 * b + 0.25 * (b1 + dt * bt2)
            c2 = 0.75 * c + 0.25 * (c1 + dt * ct2)
            if _admissible(a2, b2, c2, p.topology):
                at3, bt3, ct3 = fops.rhs(a2, b2, c2)
                a3 = (a + 2.0 * (a2 + dt * at3)) / 3.0
                b3 = (b + 2.0 * (b2 + dt * bt3)) / 3.0
                c3 = (c + 2.0 * (c2 + dt * ct3)) / 3.0
                if _admissible(a3, b3, c3, p.topology):
                    prof = Profile(topology=p.topology, r=p.r, a=a3, b=b3, c=c3,
                                   s0=p.s0)
                    return FlowState(profile=prof, t=state.t + dt, dt=dt,
                                     step_index=state.step_index + 1,
                                     T_hat=state.T_hat, history=state.history,
                                     c_tv=state.c_tv)
        dt *= 0.5
    raise SolverStallError("persistent step rejection; state left unchanged")


def nut_residual(p: Profile, s_inner: float) -> float:
    """sup over the inner region of |b_s - (2-u)| + |c_s - u^2|.

    Vanishing residual characterizes the Taub-NUT profile identities.
    """
    if p.topology is not Topology.NUT:
        raise InvalidProfileError("nut residual needs nut topology")
    bs, cs, _, _ = derivatives(p)
    s = p.s
    m = (s > 0) & (s <= s_inner)
    if not np.any(m):
        raise ValueError("inner region contains no grid nodes")
    u = p.c[m] / p.b[m]
    return float(np.max(np.abs(bs[m] - (2 - u)) + np.abs(cs[m] - u**2)))


def running_T_hat(history, window=25, growth=3.0):
    """Deterministic singular-time estimate from the recorded max |Rm|.

    Linear fit of 1/max|Rm| against t over the trailing window once the
    curvature has grown by the given factor; NaN before that.
    """
    if len(history) < 8:
        return np.nan
    t = np.array([rec[0] for rec in history])
    rm = np.array([rec[2] for rec in history])
    if rm[-1] < growth * rm[0]:
        return np.nan
    k = min(window, len(history) // 2)
    tt, yy = t[-k:], 1.0 / rm[-k:]
    sl, ic = np.polyfit(tt, yy, 1)
    if sl >= 0:
        return np.nan
    return float(-ic / sl)


def monitor_record(state: FlowState, fops: FlowOps, s_inner=1.2,
                   ext_marker=None, mu=1.0, nu=1.0, mass_window=None):
    """One row of the flow time series.

    ``ext_marker``: arclength beyond which the initial data was pure
    background; curvature there is traced separately (exterior quiescence).
    ``mu``, ``nu`` weight the interior-estimate traces
    f_pm = c b_ss -/+ mu b_s^2 -/+ nu c_s^2.
    """
    p = state.profile
    fr = curvature(p)
    i = p.interior()
    u_max = float(np.max(p.c[i] / p.b[i]))
    bs, cs, bss, _ = derivatives(p)
    try:
        m = mass(p, window=mass_window)
    except Exception:
        m = np.nan
    c2rm = float(np.max(p.c**2 * fr.riem_norm))
    max_rm = float(np.max(fr.riem_norm))
    that = state.T_hat if state.T_hat is not None else running_T_hat(state.history)
    ratio = (that - state.t) * max_rm if np.isfinite(that) and that > state.t else np.nan
    if p.topology is Topology.NUT:
        nres = nut_residual(p, s_inner)
    else:
        nres = np.nan
    core = slice(0, p.r.size - 1)
    fbase = p.c[core] * bss[core]
    fminus = fbase - mu * bs[core] ** 2 - nu * cs[core] ** 2
    fplus = fbase + mu * bs[core] ** 2 + nu * cs[core] ** 2
    if ext_marker is not None:
        m_ext = p.s >= ext_marker
        ext_rm = float(np.max(fr.riem_norm[m_ext])) if np.any(m_ext) else np.nan
    else:
        ext_rm = np.nan
    tv_max = float(np.max(state.c_tv)) if state.c_tv is not None else 0.0
    min_b2rm = float(np.min(p.b[i] ** 2) * max_rm)
    return (state.t, state.dt, max_rm, p.bolt_size, m, u_max,
            float(np.min(bs[:-1])), float(np.min(cs[:-1])), c2rm, ratio, nres,
            float(np.max(bs[:-1])), float(np.max(cs[:-1])),
            float(np.min(fminus)), float(np.max(fplus)), ext_rm, tv_max,
            min_b2rm)


def simulate(state: FlowState, t_end=None, max_steps=10_000_000, cfl=0.2,
             monitor_every=200, stop_max_rm=None, stop_bolt_below=None,
             stop_after_steps=None, s_inner=1.2, ext_marker=None,
             mu=1.0, nu=1.0, mass_window=None, on_record=None) -> FlowState:
    """March the flow, recording monitors every ``monitor_every`` steps.

    Stops at t_end, on curvature exceeding ``stop_max_rm``, when the bolt
    size drops under ``stop_bolt_below``, or after ``stop_after_steps``
    accepted steps.  ``on_record`` receives each new monitor row (for
    streaming writers).  All stop conditions are evaluated on recorded
    rows only, so a resumed run reproduces the identical row sequence.
    """
    fops = FlowOps(state.profile.r, state.profile.topology)
    fops.check_gauge(state.profile.a)
    start_index = state.step_index
    if state.c_tv is None:
        state.c_tv = np.zeros(state.profile.r.size)

    def record():
        rec = monitor_record(state, fops, s_inner, ext_marker, mu, nu, mass_window)
        state.history.append(rec)
        if on_record:
            on_record(rec)
        return rec

    if not state.history:
        record()
    reason = None
    for _ in range(max_steps):
        if t_end is not None and state.t >= t_end:
            reason = "t_end"
            break
        if stop_after_steps is not None and state.step_index - start_index >= stop_after_steps:
            reason = "steps"
            break
        c_old = state.profile.c
        state = step(state, fops, cfl=cfl)
        state.c_tv += np.abs(state.profile.c - c_old)
        if state.step_index % monitor_every == 0:
            rec = record()
            if stop_max_rm is not None and rec[2] >= stop_max_rm:
                reason = "max_rm"
                break
            if stop_bolt_below is not None and rec[3] <= stop_bolt_below:
                reason = "bolt"
                break
    if reason is None:
        raise SolverStallError("step budget exhausted before a stop condition")
    # a step-budget stop stays on the cadence so a resumed run reproduces
    # the row sequence byte for byte
    if reason != "steps" and state.history[-1][0] != state.t:
        record()
    return state


def detect_singularity(state: FlowState, threshold, theta=0.1,
                       bg_u=None, rescale_inner=6.0,
                       fit_window=(0.02, 0.7)) -> BlowupReport:
    """Locate the singular time and the blow-up region.

    Preconditions: recorded max |Rm| exceeded ``threshold``.  The singular
    time comes from the linear fit of 1/max|Rm| over the resolved part of
    the singular regime (samples whose curvature lies between the given
    fractions of the final value; the last stretch is excluded because the
    collapsing bolt drops under the grid scale there and biases the fit).
    The blow-up set joins the collapsed-fiber region
    {c < theta * outer plateau of c} with the above-threshold curvature
    region and must be an initial interval.
    """
    hist = state.history
    if not hist:
        raise NoSingularityError("empty history")
    rm = np.array([rec[2] for rec in hist])
    t = np.array([rec[0] for rec in hist])
    if np.max(rm) < threshold:
        raise NoSingularityError(
            f"max |Rm| = {np.max(rm):.3g} never exceeded threshold {threshold:.3g}")
    lo, hi = fit_window
    mask = (rm >= lo * rm[-1]) & (rm <= hi * rm[-1])
    if np.count_nonzero(mask) < 8:
        mask = rm >= 0.01 * rm[-1]
    idx = np.where(mask)[0][-200:]
    sl, ic = np.polyfit(t[idx], 1.0 / rm[idx], 1)
    if sl >= 0:
        raise NoSingularityError("curvature tail is not approaching a blow-up")
    T_hat = float(-ic / sl)
    good = t < T_hat
    type_one_sup = float(np.max((T_hat - t[good]) * rm[good]))

    p = state.profile
    fr = curvature(p)
    s = p.s
    outer = s >= 0.75 * s[-1]
    plateau = float(np.median(p.c[outer]))
    collapsed = p.c < theta * plateau
    hot = fr.riem_norm > threshold
    blow = collapsed | hot
    k = np.where(~blow)[0]
    if k.size == 0 or not blow[0]:
        raise StructuralViolationError("blow-up set is not anchored at the bolt")
    first_ok = k[0]
    if np.any(blow[first_ok:]):
        raise StructuralViolationError("blow-up set is not an initial interval")
    R = float(s[first_ok - 1]) if first_ok > 0 else 0.0

    dist = np.nan
    if bg_u is not None:
        _, dist = blowup_rescale(p, T_hat, state.t, bg_u, rescale_inner)
    return BlowupReport(T_hat=T_hat, type_one_sup=type_one_sup, blowup_R=R,
                        rescaled_u_distance=float(dist), threshold=float(threshold),
                        interval_is_initial=True)


def blowup_rescale(p: Profile, T_hat: float, t: float, bg_u, inner=6.0):
    """Type-I rescaling anchored at the bolt and distance to the model.

    Returns the rescaled profile (as arrays (s_hat, b_hat, c_hat)) and the
    sup distance of its squashing ratio to the model ratio ``bg_u`` over
    the inner region.
    """
    if T_hat <= t:
        raise ValueError("rescale requires T_hat > t")
    lam = np.sqrt(T_hat - t)
    s_hat = p.s / lam
    b_hat = p.b / lam
    c_hat = p.c / lam
    m = (s_hat > 0) & (s_hat <= inner)
    u_hat = c_hat[m] / b_hat[m]
    u_ref = bg_u(s_hat[m])
    dist = float(np.max(np.abs(u_hat - u_ref)))
    return (s_hat, b_hat, c_hat), dist
