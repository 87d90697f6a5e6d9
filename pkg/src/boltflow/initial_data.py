"""Glued initial data: cone-into-Bolt background, the time-slice family of
shrinker-glued metrics, bump cutoffs, eigenmode perturbations and the
diagonal reduction.

The glued background agrees with the asymptotic cone of the shrinker up to
a radius R, with a rescaled Taub-Bolt metric alpha^2 g_Bolt beyond 3R, and
blends monotonically in between; alpha is chosen large enough that the
Bolt coefficients dominate the cone ones throughout the blend, which makes
the blend monotone by inspection of its derivative.  The time-slice metric
places the self-similarly scaled shrinker profile sqrt(1-t0) (b,c)(s /
sqrt(1-t0)) near the bolt and interpolates the squared coefficients to the
glued background across (R1, R2), after which it is exactly Bolt data.
Perturbations add scaled eigenmodes of the weighted Lichnerowicz operator
under a compactly supported cutoff and are reduced back to diagonal form
by the orbit-orthogonal choice of radial direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .grids import graded_grid
from .profile import (InvalidProfileError, Profile, Topology, class_check,
                      curvature, derivatives, resample_arclength)
from .reference import SolitonBackground, taub_bolt
from .spectral import SpectralResult, SymTensorU2


class GlueError(RuntimeError):
    pass


class ConfigurationError(ValueError):
    pass


class PerturbationSizeError(ValueError):
    pass


class DegeneracyError(ValueError):
    pass


def smoothstep(x):
    """Quintic smoothstep: 0 below 0, 1 above 1, C^2 across both ends."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


@dataclass
class GlueConfig:
    """Radii and perturbation caps of the glued family.

    The transition radii obey R1 = R2/2 = R3/(4 sqrt 2) = sqrt(Gamma0/2);
    gamma0 cuts off the perturbation inside the pure-shrinker region.  The
    coefficient cap is |p| <= p_bar (1 - t0)^{|lambda_*|}.
    """

    gamma0: float = 0.7
    t0: float = 0.9
    Gamma0: float = 8.0
    p_bar: float = 0.35
    alpha: float | None = None
    bolt_n: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.t0 < 1.0):
            raise ConfigurationError("t0 must lie in [0, 1)")
        if self.gamma0 <= 0 or self.Gamma0 <= 0:
            raise ConfigurationError("scales must be positive")

    @property
    def R1(self):
        return float(np.sqrt(self.Gamma0 / 2.0))

    @property
    def R2(self):
        return 2.0 * self.R1

    @property
    def R3(self):
        return 4.0 * np.sqrt(2.0) * self.R1

    @property
    def R0(self):
        return 0.5 * self.R1

    def radii(self):
        return self.R0, self.R1, self.R2, self.R3


class GlueBackground:
    """Callable cone -> rescaled-Bolt background (the outer piece)."""

    def __init__(self, R: float, alpha=None, bolt_n=1.0, margin=1.25):
        if R < 3.0:
            raise GlueError("glueing radius must be at least 3")
        self.R = float(R)
        tb = taub_bolt(bolt_n, s_max=80.0, nodes=8001)
        self._tb_b = CubicSpline(tb.s, tb.b)
        self._tb_c = CubicSpline(tb.s, tb.c)
        self._tb_smax = float(tb.s[-1])
        if alpha is None:
            alpha = margin * self._min_alpha()
        self.alpha = float(alpha)
        bad = self._dominance_gap(self.alpha)
        if bad > 0:
            raise GlueError(
                f"alpha={self.alpha:g} too small: Bolt coefficients fall under the "
                f"cone by {bad:.3g} on the blend interval")

    def _dominance_gap(self, alpha):
        ss = np.linspace(self.R, 3 * self.R, 257)
        bb = alpha * self._tb_b(ss / alpha)
        cc = alpha * self._tb_c(ss / alpha)
        gap_b = np.max(ss * 2.0**-0.25 - bb)
        gap_c = np.max(ss * 2.0**-0.5 - cc)
        return max(float(gap_b), float(gap_c))

    def _min_alpha(self):
        lo, hi = 0.5, 400.0
        if self._dominance_gap(hi) > 0:
            raise GlueError("no admissible rescaling found")
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self._dominance_gap(mid) > 0:
                lo = mid
            else:
                hi = mid
        return hi

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s / self.alpha > self._tb_smax):
            raise GlueError("glue background evaluated beyond its Bolt table")
        bb = self.alpha * self._tb_b(s / self.alpha)
        cc = self.alpha * self._tb_c(s / self.alpha)
        eta = 1.0 - smoothstep((s - self.R) / (2.0 * self.R))
        b = np.where(s <= self.R, s * 2.0**-0.25, eta * s * 2.0**-0.25 + (1 - eta) * bb)
        c = np.where(s <= self.R, s * 2.0**-0.5, eta * s * 2.0**-0.5 + (1 - eta) * cc)
        return b, c


def glue_cone_to_bolt(R: float, grid, alpha=None, bolt_n=1.0, delta_floor=1e-3) -> Profile:
    """Profile of the cone-into-Bolt background on the given arclength grid.

    The cone vertex is singular, so the grid must stay away from s = 0;
    the glued slice of ``build_G0`` is what caps the geometry smoothly.
    """
    grid = np.asarray(grid, dtype=float)
    if grid[0] <= 0:
        raise GlueError("the cone background needs a grid excluding s = 0")
    gb = GlueBackground(R, alpha=alpha, bolt_n=bolt_n)
    b, c = gb(grid)
    prof = Profile(topology=Topology.BOLT, r=grid, a=np.ones(grid.size), b=b, c=c,
                   s0=float(grid[0]))
    _verify_glue(prof, delta_floor)
    return prof


def _verify_glue(prof: Profile, delta_floor):
    bs, cs, _, _ = derivatives(prof)
    i = prof.interior()
    u = prof.c[i] / prof.b[i]
    if np.max(u) > 1.0 - delta_floor:
        k = int(np.argmax(u))
        raise GlueError(f"squashing ratio reaches {np.max(u):.4f} near s = "
                        f"{prof.s[i][k]:.3f}; blend violates u <= 1 - delta")
    core = slice(1, prof.r.size - 2)
    if np.min(bs[core]) <= 0 or np.min(cs[core]) <= 0:
        j = int(np.argmin(np.minimum(bs[core], cs[core])))
        raise GlueError(f"blend loses monotonicity near s = {prof.s[core][j]:.3f}")


def scaled_shrinker(bg: SolitonBackground, t0: float, s):
    """(b, c) of sqrt(1-t0) (b,c)_shrinker(s / sqrt(1-t0)) on the grid."""
    lam = np.sqrt(1.0 - t0)
    s = np.asarray(s, dtype=float)
    vals = bg.eval(np.maximum(s, 0.0) / lam)
    b = lam * vals[0]
    c = lam * vals[1]
    c = np.where(s <= 0, 0.0, c)
    return b, c


def build_G0(bg: SolitonBackground, cfg: GlueConfig, grid, delta_floor=1e-3) -> Profile:
    """The glued time-slice metric: scaled shrinker inside, Bolt data outside."""
    R0, R1, R2, R3 = cfg.radii()
    lam = np.sqrt(1.0 - cfg.t0)
    if R1 / lam < 3.0:
        raise ConfigurationError(
            "1 - t0 too large: the shrinker is nowhere near its cone at the blend")
    grid = np.asarray(grid, dtype=float)
    if abs(grid[0]) > 1e-14:
        raise ConfigurationError("the glued slice needs the axis on its grid")
    if grid[-1] <= 3 * R3:
        raise ConfigurationError("grid must extend past the Bolt transition 3*R3")
    gb = GlueBackground(R3, alpha=cfg.alpha, bolt_n=cfg.bolt_n)
    bF, cF = scaled_shrinker(bg, cfg.t0, grid)
    bO, cO = gb(grid)
    eta = 1.0 - smoothstep((grid - R1) / (R2 - R1))
    b2 = eta * bF**2 + (1 - eta) * bO**2
    c2 = eta * cF**2 + (1 - eta) * cO**2
    b = np.sqrt(b2)
    c = np.sqrt(np.maximum(c2, 0.0))
    c[0] = 0.0
    prof = Profile(topology=Topology.BOLT, r=grid, a=np.ones(grid.size), b=b, c=c)
    _verify_glue(prof, delta_floor)
    rep = class_check(prof)
    if not rep.ok:
        raise GlueError(f"glued slice fails class membership: {rep.passes}")
    return prof


def bump(bg: SolitonBackground, scale: float, t0: float, s):
    """Cutoff in the shrinker potential: 1 below scale/2(1-t0), 0 above scale/(1-t0).

    Evaluated at background arclength s; returns values and measured
    derivative bounds (max |d eta/ds|, max |d^2 eta/ds^2|).
    """
    if scale <= 0:
        raise ConfigurationError("bump scale must be positive")
    s = np.asarray(s, dtype=float)
    f = bg.f_of(s)
    lo = 0.5 * scale / (1.0 - t0)
    hi = scale / (1.0 - t0)
    eta = 1.0 - smoothstep((f - lo) / (hi - lo))
    if s.size >= 5:
        d1 = np.gradient(eta, s)
        d2 = np.gradient(d1, s)
        stats = (float(np.max(np.abs(d1))), float(np.max(np.abs(d2))))
    else:
        stats = (np.nan, np.nan)
    return eta, stats


def _mode_splines(mode: SymTensorU2):
    """Parity-respecting interpolants of the four mode components."""
    s = mode.s
    sm = np.concatenate([-s[::-1], s])

    def mk(vals, parity):
        ext = np.concatenate([parity * vals[::-1], vals])
        return CubicSpline(sm, ext)

    return (mk(mode.h00, 1.0), mk(mode.h11, 1.0),
            mk(mode.h33, 1.0), mk(mode.h03, -1.0))


def perturb(g0: Profile, bg: SolitonBackground, cfg: GlueConfig,
            spectrum: SpectralResult, p, delta_floor=0.0) -> Profile:
    """The eigenmode-perturbed slice, reduced to diagonal form.

    Adds (1-t0) phi* (eta_gamma0 sum_j p_j h_j) realized through the
    self-similar coordinate map: at slice arclength s the mode components
    are evaluated at s_hat = s / sqrt(1-t0), multiplied by the squared
    scaled-shrinker coefficients, and the possibly non-diagonal result is
    diagonalized and resampled.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.size > spectrum.K:
        raise ConfigurationError("more coefficients than unstable modes")
    cap = cfg.p_bar * (1.0 - cfg.t0) ** abs(spectrum.lambda_star)
    if np.linalg.norm(p) > cap + 1e-15:
        raise PerturbationSizeError(
            f"|p| = {np.linalg.norm(p):.4g} exceeds the cap {cap:.4g}")
    if np.all(p == 0.0):
        return g0
    lam = np.sqrt(1.0 - cfg.t0)
    s = g0.r
    s_hat = s / lam
    eta, _ = bump(bg, cfg.gamma0, cfg.t0, s_hat)
    # support must sit inside the pure-shrinker region of the slice
    outside = s > cfg.R1
    if np.any(eta[outside] > 1e-12):
        raise ConfigurationError(
            "gamma0 too large: the perturbation leaks out of the shrinker region")

    H = np.zeros((4, s.size))
    for j, pj in enumerate(p):
        if pj == 0.0:
            continue
        mode = spectrum.eigentensors[j]
        if np.max(mode.s) < np.max(s_hat[eta > 0]):
            raise ConfigurationError("mode grid does not cover the bump support")
        spl = _mode_splines(mode)
        for comp in range(4):
            H[comp] += pj * spl[comp](s_hat)
    H *= eta

    bF, cF = scaled_shrinker(bg, cfg.t0, s)
    A = 1.0 + H[0]
    B = g0.b**2 + bF**2 * H[1]
    C = g0.c**2 + cF**2 * H[2]
    D = cF * H[3]
    out = diagonalize(A, B, C, D, s, topology=Topology.BOLT)
    rep = class_check(out)
    if not rep.ok or (delta_floor > 0 and rep.u_max > 1 - delta_floor):
        raise PerturbationSizeError(
            f"perturbed slice leaves the class ({rep.passes}); reduce p_bar")
    return out


def diagonalize(A, B, C, D, r, topology=Topology.BOLT) -> Profile:
    """Reduce A dr^2 + B (s1^2+s2^2) + C s3^2 + 2 D dr.s3 to diagonal form.

    The radial direction v = dr - (D/C) X3 is orthogonal to the orbits, so
    the lapse squared becomes A - D^2/C while B and C are unchanged.  The
    arclength reparametrization relabels each node by its arclength, which
    keeps the coefficient values exact and preserves the grid grading.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    D = np.asarray(D, dtype=float)
    r = np.asarray(r, dtype=float)
    i = slice(1, None) if abs(r[0]) < 1e-14 else slice(0, None)
    if np.any(B[i] <= 0) or np.any(C[i] <= 0):
        raise DegeneracyError("orbit coefficients lost positivity")
    lapse2 = A.copy()
    lapse2[i] = A[i] - D[i] ** 2 / C[i]
    if abs(r[0]) < 1e-14:
        lapse2[0] = A[0]        # D vanishes on the axis by parity
    if np.any(lapse2 <= 0):
        raise DegeneracyError("radial direction degenerates: perturbation too large")
    a = np.sqrt(lapse2)
    b = np.sqrt(np.maximum(B, 0.0))
    c = np.sqrt(np.maximum(C, 0.0))
    axis = abs(r[0]) < 1e-14
    if axis:
        c[0] = 0.0
        if topology is Topology.NUT:
            b[0] = 0.0
    from scipy.integrate import cumulative_simpson
    s_new = cumulative_simpson(a, x=r, initial=0.0)
    if not axis:
        s_new = s_new + r[0]
    prof = Profile(topology=topology, r=s_new, a=np.ones(r.size), b=b, c=c,
                   s0=float(s_new[0]) if not axis else 0.0)
    return prof
