"""Runtime monitors: the invariant suite over recorded flows, membership in
the comparison box around the shrinker, and the bisection experiment that
separates collapse from escape.

The box compares the flow, rescaled to soliton scale in the diagonal
arclength gauge anchored at the bolt, against the shrinker background:
h = g_rescaled - g_bar as a U(2) tensor on the background grid.  Exit
happens when a weighted-L2 projection bound or a C^0/C^1/C^2 frame bound
is violated; each exit records which bound failed.  The thresholds use
(1-t0)^{|lambda_*|} by default; the variant with the running (1-t) factor
sits behind a switch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flow import MONITOR_COLUMNS
from .profile import Profile
from .spectral import SpectralResult, SymTensorU2, _operator


class BracketError(RuntimeError):
    pass


@dataclass
class BoxParams:
    lambda_star: float
    mu_u: float = 0.5
    mu_s: float = 0.5
    eps0: float = 0.5
    eps1: float = 0.5
    eps2: float = 0.5
    t0: float = 0.9
    threshold_variant: str = "fixed_t0"   # or "time_dependent"

    def __post_init__(self):
        for name in ("mu_u", "mu_s", "eps0", "eps1", "eps2"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.threshold_variant not in ("fixed_t0", "time_dependent"):
            raise ValueError("unknown threshold variant")


def _col(history, name):
    return np.array([rec[MONITOR_COLUMNS.index(name)] for rec in history])


@dataclass
class InvariantVerdicts:
    passes: dict
    extrema: dict

    @property
    def ok(self):
        return all(self.passes.values())


def invariant_suite(history, u_tol=1e-6, slope_tol=1e-6, mass_tol=1e-3,
                    c2rm_factor=1.10, quiescence_factor=3.0,
                    tv_cap_factor=10.0) -> InvariantVerdicts:
    """Evaluate the preserved-quantity bounds along a recorded run.

    Checks, with their configured tolerances: u <= 1, slope nonnegativity,
    mass conservation, boundedness of c^2 |Rm| relative to its initial
    value, the slope ceilings max(b_s), max(c_s) <= max(initial, 2),
    b^2 |Rm| >= 1, exterior quiescence, and bounded total variation of
    c(r, .) in time.  Extremal traces are returned alongside.
    """
    if len(history) < 2:
        raise ValueError("need at least two samples")
    u_max = _col(history, "u_max")
    min_bs = _col(history, "min_bs")
    min_cs = _col(history, "min_cs")
    max_bs = _col(history, "max_bs")
    max_cs = _col(history, "max_cs")
    m = _col(history, "mass")
    c2rm = _col(history, "c2rm_max")
    ext = _col(history, "ext_max_rm")
    tv = _col(history, "c_tv_max")
    b2rm = _col(history, "min_b2rm")
    rm = _col(history, "max_rm")
    fmin = _col(history, "fminus_min")
    fmax = _col(history, "fplus_max")

    mass_drift = float(np.nanmax(np.abs(m - m[0])))
    passes = {
        "u_le_1": bool(np.max(u_max) <= 1.0 + u_tol),
        "slopes_nonneg": bool(min(np.min(min_bs), np.min(min_cs)) >= -slope_tol),
        "mass_conserved": bool(mass_drift < mass_tol),
        "c2rm_bounded": bool(np.max(c2rm) <= c2rm_factor * c2rm[0]),
        "slope_ceiling_b": bool(np.max(max_bs) <= max(max_bs[0], 2.0) + 1e-6),
        "slope_ceiling_c": bool(np.max(max_cs) <= max(max_cs[0], 2.0) + 1e-6),
        "b2rm_lower": bool(np.nanmin(b2rm) >= 1.0 - 1e-6),
        "exterior_quiet": bool(np.all(np.isnan(ext))
                               or np.nanmax(ext) <= quiescence_factor * ext[0] + 1e-12),
        "c_variation_bounded": bool(
            np.max(tv) <= tv_cap_factor * (1.0 / m[0] if m[0] > 0 else np.inf)),
    }
    extrema = {
        "u_max": float(np.max(u_max)),
        "min_bs": float(np.min(min_bs)),
        "min_cs": float(np.min(min_cs)),
        "mass_drift": mass_drift,
        "c2rm_max": float(np.max(c2rm)),
        "c2rm_initial": float(c2rm[0]),
        "rm_growth": float(rm[-1] / rm[0]),
        "fminus_min": float(np.min(fmin)),
        "fplus_max": float(np.max(fmax)),
        "ext_rm_max": float(np.nanmax(ext)) if not np.all(np.isnan(ext)) else np.nan,
        "c_tv_max": float(np.max(tv)),
    }
    return InvariantVerdicts(passes=passes, extrema=extrema)


def profile_to_h(bg, p: Profile, t: float, T_ref=1.0, n_nodes=900,
                 s_max=14.0) -> SymTensorU2:
    """Difference tensor between the rescaled flow slice and the background.

    The slice is rescaled by sqrt(T_ref - t) in the diagonal arclength
    gauge anchored at the bolt and sampled on the operator grid; the
    components are relative to the background frame, so h00 = h03 = 0 and
    h11 = (b^2 - b_bar^2)/b_bar^2, h33 = (c^2 - c_bar^2)/c_bar^2.
    """
    if t >= T_ref:
        raise ValueError("rescaling requires t < T_ref")
    op = _operator(bg, n_nodes, s_max)
    lam = np.sqrt(T_ref - t)
    s_hat = op.s
    s_flow = lam * s_hat
    if s_flow[-1] > p.s[-1]:
        raise ValueError("flow grid does not cover the comparison window")
    b_hat = np.interp(s_flow, p.s, p.b) / lam
    c_hat = np.interp(s_flow, p.s, p.c) / lam
    bb, cb, *_ = bg.eval(s_hat)
    z = np.zeros_like(s_hat)
    return SymTensorU2(s=s_hat, h00=z, h11=(b_hat**2 - bb**2) / bb**2,
                       h33=(c_hat**2 - cb**2) / cb**2, h03=z.copy())


@dataclass
class BoxExit:
    time: float
    component: str
    value: float
    bound: float


def box_membership(h_series, bg, spectrum: SpectralResult, params: BoxParams,
                   n_nodes=900, s_max=14.0):
    """First exit of an h-trajectory from the box, or None if it stays in.

    ``h_series`` is a sequence of (t, SymTensorU2) on a spectral operator
    grid of the background.
    """
    op = _operator(bg, n_nodes, s_max)
    lam_exp = abs(params.lambda_star)
    for t, h in h_series:
        if h.s.shape != op.s.shape or not np.allclose(h.s, op.s):
            raise ValueError("h series grid does not match the operator grid")
        if params.threshold_variant == "fixed_t0":
            fac = (1.0 - params.t0) ** lam_exp
        else:
            fac = (1.0 - t) ** lam_exp
        _, hu, hs, _ = op.project(h, spectrum)
        checks = (
            ("L2_unstable", op.norm(hu), params.mu_u * fac),
            ("L2_stable", op.norm(hs), params.mu_s * fac),
            ("C0", float(np.max(h.frame_norm())), params.eps0),
            ("C1", float(np.max(op.grad_norm(h))), params.eps1),
            ("C2", float(np.max(op.hessian_norm(h))), params.eps2),
        )
        for name, val, bound in checks:
            if val > bound:
                return BoxExit(time=float(t), component=name, value=val, bound=bound)
    return None


def box_shoot(run_outcome, p_lo: float, p_hi: float, iters=6):
    """Bisect the coefficient separating collapse from escape.

    ``run_outcome(p)`` must return ('collapse' | 'escape', info).  The two
    endpoints must disagree; each bisection halves the bracket.  Returns
    the final bracket and the per-run log.
    """
    runs = []
    tag_lo, info = run_outcome(p_lo)
    runs.append((p_lo, tag_lo, info))
    tag_hi, info = run_outcome(p_hi)
    runs.append((p_hi, tag_hi, info))
    if tag_lo == tag_hi:
        raise BracketError(f"both endpoints gave {tag_lo!r}; widen the bracket")
    lo, hi = p_lo, p_hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        tag, info = run_outcome(mid)
        runs.append((mid, tag, info))
        if tag == tag_lo:
            lo = mid
        else:
            hi = mid
    return (lo, hi), runs
