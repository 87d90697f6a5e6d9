"""Cohomogeneity-one U(2) metric profiles and their curvature.

A metric g = a^2 dr^2 + b^2 (sigma1^2 + sigma2^2) + c^2 sigma3^2 on
R_{>0} x S^3 is stored as arrays (a, b, c) over a fixed radial grid r.
Arclength derivatives are d/ds = (1/a) d/dr.  Two ways of closing up at
r = 0 are supported:

* ``nut``  -- R^4 origin: b, c odd in s with unit slopes,
* ``bolt`` -- the CP^1 zero section of O(-1): b even with b(0) > 0, c odd
  with unit slope.

Orthonormal-frame sectional curvatures, with u = c/b:

    K01 = K02 = -b_ss / b
    K03       = -c_ss / c
    K12       = (4 - 3 u^2 - b_s^2) / b^2
    K13 = K23 = c^2/b^4 - b_s c_s / (b c)

and the mixed component W = R(e0,e1,e2,e3) = (c_s - u b_s)/b^2, which by
the first Bianchi identity appears with partners (W, W, -2W).  The norm
convention used throughout is

    |Rm|^2 = 4 (K01^2 + K02^2 + K03^2 + K12^2 + K13^2 + K23^2)
             + 8 (W^2 + W^2 + (2W)^2),

i.e. every algebraically independent component counted over all index
orders.  With this convention |Rm| of the Taub-NUT family falls off at the
cubic rate in s expected of it.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.interpolate import CubicSpline

from .grids import EVEN, ODD, RadialOps, cumulative_arclength


class Topology(Enum):
    NUT = "nut"
    BOLT = "bolt"


class InvalidProfileError(ValueError):
    pass


class ResolutionError(ValueError):
    pass


class UnclassifiableTailError(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    """Metric profile on a fixed radial grid.

    ``r`` is the fixed coordinate, ``a`` the lapse (ds = a dr), ``b`` and
    ``c`` the orbit warpings.  When the grid starts at the axis the parity
    conditions of the topology are assumed; ``s0`` anchors the arclength
    for grids that do not reach the axis.
    """

    topology: Topology
    r: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    s0: float = 0.0

    def __post_init__(self):
        for name in ("r", "a", "b", "c"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.r.shape == self.a.shape == self.b.shape == self.c.shape):
            raise InvalidProfileError("grid and coefficient arrays must share a shape")
        if np.any(np.diff(self.r) <= 0):
            raise InvalidProfileError("r must be strictly increasing")

    # -- structural helpers -------------------------------------------------
    @property
    def has_axis(self) -> bool:
        return abs(self.r[0]) < 1e-14

    @property
    def s(self) -> np.ndarray:
        return cumulative_arclength(self.r, self.a, self.s0)

    @property
    def bolt_size(self) -> float:
        return float(self.b[0]) if self.topology is Topology.BOLT else 0.0

    def interior(self) -> slice:
        return slice(1, None) if self.has_axis else slice(0, None)

    def validate(self):
        i = self.interior()
        if not np.all(np.isfinite(self.a)) or np.any(self.a <= 0):
            raise InvalidProfileError("lapse must be positive and finite")
        if np.any(self.b[i] <= 0) or np.any(self.c[i] <= 0):
            raise InvalidProfileError("b, c must be positive away from the axis")
        if self.has_axis:
            if self.topology is Topology.NUT and (abs(self.b[0]) > 1e-12 or abs(self.c[0]) > 1e-12):
                raise InvalidProfileError("nut closure requires b(0) = c(0) = 0")
            if self.topology is Topology.BOLT and (self.b[0] <= 0 or abs(self.c[0]) > 1e-12):
                raise InvalidProfileError("bolt closure requires b(0) > 0 and c(0) = 0")
        return self

    def parities(self):
        """(parity of b, parity of c) across the axis; a is always even."""
        if self.topology is Topology.NUT:
            return ODD, ODD
        return EVEN, ODD


@dataclass
class CurvatureFrame:
    """Orthonormal-frame curvature of a profile, arrays over its grid."""

    K01: np.ndarray
    K02: np.ndarray
    K03: np.ndarray
    K12: np.ndarray
    K13: np.ndarray
    K23: np.ndarray
    W: np.ndarray
    Ric00: np.ndarray
    Ric11: np.ndarray
    Ric33: np.ndarray
    riem_norm: np.ndarray


@dataclass
class ClassReport:
    """Membership data for the asymptotically flat U(2) classes."""

    topology: str
    u_max: float
    min_bs: float
    min_cs: float
    decay_exponent: float
    mass: float
    passes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.passes.values())


def derivatives(p: Profile):
    """Arclength derivatives (b_s, c_s, b_ss, c_ss) with parity stencils."""
    ops = RadialOps(p.r)
    pb, pc = p.parities()
    a = p.a
    ar = ops.d1(a, EVEN)
    br, cr = ops.d1(p.b, pb), ops.d1(p.c, pc)
    brr, crr = ops.d2(p.b, pb), ops.d2(p.c, pc)
    bs, cs = br / a, cr / a
    bss = brr / a**2 - br * ar / a**3
    css = crr / a**2 - cr * ar / a**3
    return bs, cs, bss, css


def _axis_fill(r, arr):
    """Even extrapolation of a scalar invariant to the axis node."""
    arr[0] = (arr[1] * r[2] ** 2 - arr[2] * r[1] ** 2) / (r[2] ** 2 - r[1] ** 2)


def curvature(p: Profile) -> CurvatureFrame:
    """Frame sectional curvatures, Ricci diagonal and |Rm| of a profile."""
    p.validate()
    if p.r.size < 7:
        raise ResolutionError("grid too coarse for curvature stencils")
    bs, cs, bss, css = derivatives(p)
    n = p.r.size
    b, c = p.b, p.c
    i = p.interior()
    u = np.zeros(n)
    K01 = np.zeros(n)
    K03 = np.zeros(n)
    K12 = np.zeros(n)
    K13 = np.zeros(n)
    W = np.zeros(n)
    u[i] = c[i] / b[i]
    K01[i] = -bss[i] / b[i]
    K03[i] = -css[i] / c[i]
    K12[i] = (4 - 3 * u[i] ** 2 - bs[i] ** 2) / b[i] ** 2
    K13[i] = c[i] ** 2 / b[i] ** 4 - bs[i] * cs[i] / (b[i] * c[i])
    W[i] = (cs[i] - u[i] * bs[i]) / b[i] ** 2
    if p.has_axis:
        for arr in (K01, K03, K12, K13, W):
            _axis_fill(p.r, arr)
    Ric00 = 2 * K01 + K03
    Ric11 = K01 + K12 + K13
    Ric33 = K03 + 2 * K13
    rm = np.sqrt(4 * (2 * K01**2 + K03**2 + K12**2 + 2 * K13**2) + 48 * W**2)
    return CurvatureFrame(K01=K01, K02=K01.copy(), K03=K03, K12=K12, K13=K13,
                          K23=K13.copy(), W=W, Ric00=Ric00, Ric11=Ric11,
                          Ric33=Ric33, riem_norm=rm)


def max_ricci(p: Profile) -> float:
    fr = curvature(p)
    return float(max(np.max(np.abs(fr.Ric00)), np.max(np.abs(fr.Ric11)),
                     np.max(np.abs(fr.Ric33))))


def scale(p: Profile, alpha: float) -> Profile:
    """Homothety g -> alpha^2 g realized on the profile arrays."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return replace(p, r=alpha * p.r, a=p.a.copy(), b=alpha * p.b, c=alpha * p.c,
                   s0=alpha * p.s0)


def _tail_window(s, window=None, fraction=0.1):
    """Indices of the tail fit window: (s_lo, s_hi) or the last decade."""
    if window is not None:
        lo, hi = window
        idx = np.where((s >= lo) & (s <= hi))[0]
    else:
        smax = s[-1]
        lo = max(s[0], fraction * smax)
        idx = np.where(s >= lo)[0]
    if idx.size < 8:
        raise ResolutionError("tail window has too few nodes")
    return idx


def mass(p: Profile, slope_split=0.5, window=None) -> float:
    """Tail-extrapolated limit of 1/c.

    Returns 0 when the tail slope indicates the c ~ s branch of the
    asymptotic dichotomy.  The extrapolation fits c against 1/s over the
    last decade of the grid (or an explicit window for backgrounds whose
    asymptotic regime starts further out), removing the leading
    finite-radius bias.
    """
    s = p.s
    idx = _tail_window(s, window)
    _, cs, _, _ = derivatives(p)
    cw = p.c[idx]
    csw = cs[idx]
    neg_frac = float(np.mean(csw < -1e-10))
    if neg_frac > 0.02:
        raise UnclassifiableTailError("tail of c is not monotone")
    if np.median(csw) > slope_split:
        return 0.0
    A = np.vstack([np.ones(idx.size), 1.0 / s[idx], 1.0 / s[idx] ** 2]).T
    coef, *_ = np.linalg.lstsq(A, cw, rcond=None)
    c_inf = coef[0]
    if c_inf <= 0:
        raise UnclassifiableTailError("tail extrapolation of c is not positive")
    return float(1.0 / c_inf)


def class_check(p: Profile, tol=1e-9, min_decay_margin=1e-3, window=None) -> ClassReport:
    """Evaluate u <= 1, monotone slopes and quadratic curvature decay.

    The decay exponent is the fitted slope of log |Rm| against log s over
    the tail window (last grid decade by default); membership wants it at
    least 2 by a reported margin.
    """
    p.validate()
    fr = curvature(p)
    bs, cs, _, _ = derivatives(p)
    i = p.interior()
    u_max = float(np.max(p.c[i] / p.b[i]))
    min_bs = float(np.min(bs))
    min_cs = float(np.min(cs))
    s = p.s
    idx = _tail_window(s, window)
    rm_tail = fr.riem_norm[idx]
    if np.all(rm_tail < 1e-13):
        exponent = np.inf
    else:
        rm_safe = np.maximum(rm_tail, 1e-300)
        slope, _ = np.polyfit(np.log(s[idx]), np.log(rm_safe), 1)
        exponent = -float(slope)
    try:
        m = mass(p, window=window)
    except UnclassifiableTailError:
        m = np.nan
    passes = {
        "u_le_1": u_max <= 1.0 + tol,
        "slopes_nonneg": min_bs >= -tol and min_cs >= -tol,
        "curvature_decay": exponent >= 2.0 + min_decay_margin,
    }
    return ClassReport(topology=p.topology.value, u_max=u_max, min_bs=min_bs,
                       min_cs=min_cs, decay_exponent=float(exponent), mass=m,
                       passes=passes)


def _parity_spline(s, f, parity):
    """Cubic spline of f(s) with the axis parity built in via mirroring."""
    if s[0] > 1e-14:
        return CubicSpline(s, f)
    sm = np.concatenate([-s[:0:-1], s])
    fm = np.concatenate([parity * f[:0:-1], f])
    return CubicSpline(sm, fm)


def resample_arclength(p: Profile, n_nodes=None) -> Profile:
    """Equivalent profile with unit lapse on a uniform arclength grid."""
    p.validate()
    if np.any(p.a <= 0):
        raise InvalidProfileError("degenerate lapse")
    from scipy.integrate import cumulative_simpson
    s = p.s0 + cumulative_simpson(p.a, x=p.r, initial=0.0)
    n = p.r.size if n_nodes is None else int(n_nodes)
    pb, pc = p.parities()
    grid = np.linspace(s[0], s[-1], n)
    if p.has_axis:
        sb = _parity_spline(s, p.b, pb)
        sc = _parity_spline(s, p.c, pc)
    else:
        sb = CubicSpline(s, p.b)
        sc = CubicSpline(s, p.c)
    b = sb(grid)
    c = sc(grid)
    if p.has_axis:
        if p.topology is Topology.NUT:
            b[0] = 0.0
        c[0] = 0.0
    return Profile(topology=p.topology, r=grid, a=np.ones(n), b=b, c=c, s0=float(s[0]))
