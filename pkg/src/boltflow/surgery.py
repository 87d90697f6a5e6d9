"""Topology-changing surgery: excise the collapsed bolt region and cap with
a smooth profile that closes up like R^4.

The cap is a Taub-NUT profile near the new origin plus a correction
supported away from the axis:

    b~(s) = b_NUT(s; n*) + (alpha + beta (s - Rbar) + gamma (s - Rbar)^2) W(s)

with W a quintic window that vanishes identically below Rbar/3 and equals
one with two flat derivatives at the seam, so value, slope and second
derivative match the retained data there exactly.  The family parameter
n* is chosen so the squashing ratio u of the cap meets the seam value,
which keeps the correction small.  Capping with exact Taub-NUT matters
numerically: the axis neighbourhood is then a stationary point of the
flow, whereas generic slope-one caps carry an order-one contraction rate
at the axis that the discrete scheme cannot balance against the origin
regularity.

Outside the cap the data is byte-identical to the input, which preserves
every tail quantity (the mass in particular) exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .initial_data import smoothstep
from .profile import (InvalidProfileError, Profile, Topology, class_check,
                      curvature, derivatives, mass)
from .reference import taub_nut


class CapError(RuntimeError):
    pass


@dataclass
class SurgeryReport:
    R_bar: float
    blowup_R: float
    nut_n: float
    mass_before: float
    mass_after: float
    smoothness_order: int
    seam_curvature_jump: float
    class_pass: bool
    cap_correction_b: tuple
    cap_correction_c: tuple


def _nut_arrays(n, s_grid):
    p = taub_nut(n, s_max=float(s_grid[-1]) * 1.02 + 1e-9,
                 nodes=max(4 * s_grid.size, 512))
    b = np.interp(s_grid, p.r, p.b)
    c = np.interp(s_grid, p.r, p.c)
    return b, c


def _fit_nut_parameter(u_seam, R_bar, lo=0.02, hi=80.0):
    """Taub-NUT parameter whose squashing ratio at arclength R_bar is u_seam.

    u decreases from 1 at the origin toward 0, monotonically in s and
    increasing in n, so bisection applies.
    """
    probe = np.array([R_bar])

    def u_at(n):
        b, c = _nut_arrays(n, probe)
        return c[0] / b[0]

    if not (0.0 < u_seam < 1.0):
        raise CapError(f"seam ratio u = {u_seam:.4f} outside (0, 1)")
    if u_at(lo) > u_seam or u_at(hi) < u_seam:
        raise CapError("seam ratio out of reach of the Taub-NUT family")
    for _ in range(60):
        mid = np.sqrt(lo * hi)
        if u_at(mid) < u_seam:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def _window(s, R_bar):
    s_on = R_bar / 3.0
    return smoothstep((s - s_on) / (R_bar - s_on))


def _correction(seam_vals, nut_vals, R_bar, s):
    """Quadratic-in-(s - Rbar) correction under the seam window."""
    dv = seam_vals[0] - nut_vals[0]
    dp = seam_vals[1] - nut_vals[1]
    dq = seam_vals[2] - nut_vals[2]
    x = s - R_bar
    poly = dv + dp * x + 0.5 * dq * x * x
    return poly * _window(s, R_bar), (float(dv), float(dp), float(0.5 * dq))


def _seam_data(p: Profile, R_bar):
    s = p.s
    bs, cs, bss, css = derivatives(p)

    def at(f):
        return float(np.interp(R_bar, s, f))

    return ((at(p.b), at(bs), at(bss)), (at(p.c), at(cs), at(css)))


def excise_and_cap(p: Profile, R_bar: float, cap_spacing=None, blowup_R=np.nan,
                   mass_window=None):
    """Remove s < R_bar and close up smoothly as R^4 data.

    The input must be bolt data in arclength gauge with nonnegative slopes
    and c <= b on the retained region.  Returns the capped profile and a
    surgery report; the retained nodes carry their input values untouched.
    R_bar is capped at a tenth of the domain so the mass fit window never
    touches the cap, keeping the mass exactly equal before and after.
    """
    if p.topology is not Topology.BOLT:
        raise InvalidProfileError("surgery expects bolt-topology input")
    if np.max(np.abs(p.a - 1.0)) > 1e-12:
        raise InvalidProfileError("surgery expects arclength gauge; resample first")
    s = p.s
    if not (s[0] < R_bar < s[-1] / 10):
        raise CapError("excision radius outside the usable range of the grid")
    keep = s >= R_bar
    if np.count_nonzero(keep) < 8:
        raise CapError("too little retained data beyond the excision radius")
    bs, cs, _, _ = derivatives(p)
    if np.min(bs[keep]) < -1e-9 or np.min(cs[keep]) < -1e-9:
        raise CapError("retained region has negative slopes; enlarge R_bar")
    if np.any(p.c[keep] > p.b[keep] * (1 + 1e-12)):
        raise CapError("retained region violates c <= b; enlarge R_bar")

    seam_b, seam_c = _seam_data(p, R_bar)
    u_seam = seam_c[0] / seam_b[0]
    nut_n = _fit_nut_parameter(u_seam, R_bar)

    if cap_spacing is None:
        cap_spacing = R_bar / 120.0
    n_cap = max(int(np.ceil(R_bar / cap_spacing)), 24)
    s_cap = np.linspace(0.0, R_bar, n_cap + 1)[:-1]

    dense = np.linspace(0.0, R_bar, 4096)
    bN, cN = _nut_arrays(nut_n, dense)
    h = dense[1] - dense[0]

    def seam_probe(f):
        val = float(np.interp(R_bar, dense, f))
        der = float((3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h))
        der2 = float((2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h**2)
        return val, der, der2

    corr_b, coef_b = _correction(seam_b, seam_probe(bN), R_bar, dense)
    corr_c, coef_c = _correction(seam_c, seam_probe(cN), R_bar, dense)
    bd = bN + corr_b
    cd = cN + corr_c
    if np.min(np.diff(bd)) <= 0 or np.min(np.diff(cd)) <= 0:
        raise CapError("cap is not monotone for this seam data; enlarge R_bar")
    if np.any(cd[1:] > bd[1:] * (1 + 1e-12)) or np.any(cd[1:] <= 0):
        raise CapError("cap violates 0 < c <= b; enlarge R_bar")

    b_cap = np.interp(s_cap, dense, bd)
    c_cap = np.interp(s_cap, dense, cd)
    bN_cap, cN_cap = _nut_arrays(nut_n, s_cap)
    wmask = s_cap <= R_bar / 3.0
    b_cap[wmask] = bN_cap[wmask]
    c_cap[wmask] = cN_cap[wmask]
    b_cap[0] = c_cap[0] = 0.0

    grid = np.concatenate([s_cap, s[keep]])
    b_new = np.concatenate([b_cap, p.b[keep]])
    c_new = np.concatenate([c_cap, p.c[keep]])
    out = Profile(topology=Topology.NUT, r=grid, a=np.ones(grid.size),
                  b=b_new, c=c_new)

    m_before = mass(p, window=mass_window)
    m_after = mass(out, window=mass_window)
    rep = class_check(out)
    fr = curvature(out)
    i_seam = int(np.searchsorted(grid, R_bar))
    lo_i = max(i_seam - 2, 1)
    hi_i = min(i_seam + 3, grid.size - 1)
    jump = float(np.max(np.abs(np.diff(fr.riem_norm[lo_i:hi_i]))))
    report = SurgeryReport(R_bar=float(R_bar), blowup_R=float(blowup_R),
                           nut_n=nut_n, mass_before=m_before, mass_after=m_after,
                           smoothness_order=2, seam_curvature_jump=jump,
                           class_pass=rep.ok, cap_correction_b=coef_b,
                           cap_correction_c=coef_c)
    return out, report


def surgery_admissible(blowup_report, p_final: Profile, R_bar: float):
    """Whether excision at R_bar respects the measured blow-up structure.

    True iff R_bar clears the blow-up interval, the excised region reached
    the curvature threshold and the retained region stayed below it.
    """
    if blowup_report is None:
        return False, "no singularity was detected"
    if R_bar <= blowup_report.blowup_R:
        return False, "R_bar does not clear the blow-up interval"
    fr = curvature(p_final)
    s = p_final.s
    inside = s < R_bar
    outside = ~inside
    thr = blowup_report.threshold
    if float(np.max(fr.riem_norm[inside])) < thr:
        return False, "excised region never exceeded the curvature threshold"
    if float(np.max(fr.riem_norm[outside])) >= thr:
        return False, "retained region also exceeded the curvature threshold"
    return True, "admissible"
