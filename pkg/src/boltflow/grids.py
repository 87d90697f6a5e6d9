"""Radial grids and finite-difference derivative operators.

All profile data lives on a strictly increasing grid in a fixed radial
coordinate r, with the axis (nut or bolt) at r = 0 when present.  Radial
parity across the axis is handled with ghost nodes: an even function
reflects as f(-r) = f(r), an odd one as f(-r) = -f(r).

Stencil selection is per node: wherever the five-point window around a
node is uniformly spaced the 4th-order central formulas apply, elsewhere
the 3-point nonuniform ones.  The high order matters near the axis, where
curvature quantities divide finite-difference output by powers of r, and
grids are built with an exactly uniform stretch there.
"""
from __future__ import annotations

import numpy as np

EVEN = 1.0
ODD = -1.0


def is_uniform(r, rtol=1e-10):
    h = np.diff(r)
    return h.size > 0 and np.all(np.abs(h - h[0]) <= rtol * h[0])


def graded_grid(r_max, h_min, h_max, r_fine, r_coarse):
    """Grid with spacing h_min inside r_fine, smoothly ramped to h_max.

    The fine region is exactly uniform so parity stencils at the axis keep
    their full order.
    """
    if not (0.0 < h_min <= h_max and 0.0 <= r_fine <= r_coarse):
        raise ValueError("inconsistent grading parameters")
    pts = [0.0]
    while pts[-1] < r_max:
        r = pts[-1]
        if r < r_fine:
            h = h_min
        elif r < r_coarse:
            x = (r - r_fine) / (r_coarse - r_fine)
            h = h_min + (h_max - h_min) * x * x * (3 - 2 * x)
        else:
            h = h_max
        pts.append(r + h)
    return np.asarray(pts)


class RadialOps:
    """First/second derivative operators bound to one grid.

    ``parity`` arguments describe behaviour across r = 0 and only matter
    when the grid starts at the axis.  The outermost node uses one-sided
    differences (flows freeze it anyway).

    ``compact_axis`` keeps the axis-adjacent stencils 3-point.  The wide
    ghost stencils are more accurate but, fed back through the evolution
    equations at a nut (where 1/b and 1/c factors peak at the first
    node), they support an unstable discrete mode; time steppers must use
    the compact variant.
    """

    N_GHOST = 2

    def __init__(self, r, compact_axis=False):
        self.compact_axis = bool(compact_axis)
        r = np.asarray(r, dtype=float)
        if r.ndim != 1 or r.size < 7:
            raise ValueError("need a 1-D grid with at least 7 nodes")
        h = np.diff(r)
        if np.any(h <= 0):
            raise ValueError("grid must be strictly increasing")
        self.r = r
        self.n = r.size
        self.h = h
        self._axis = abs(r[0]) < 1e-14
        n = self.n
        tol = 1e-10 * float(np.min(h))
        eq = np.abs(np.diff(h)) <= tol          # eq[j]: h[j] == h[j+1]
        order4 = np.zeros(n, dtype=bool)
        if n >= 5:
            order4[2 : n - 2] = eq[: n - 4] & eq[1 : n - 3] & eq[2 : n - 2]
        # axis handling uses ghosts for nodes 0..2 when the first run is uniform
        self.h_axis = h[0]
        self.axis_uniform = self._axis and n > 5 and np.all(np.abs(h[:4] - h[0]) <= tol)
        self.edge_uniform = n > 6 and np.all(np.abs(h[-5:] - h[-1]) <= tol)
        self.left_uniform = (not self._axis) and n > 6 and np.all(np.abs(h[:5] - h[0]) <= tol)
        if self.compact_axis:
            self.axis_uniform = False
            if self._axis:
                order4[:5] = False
        self.order4 = order4
        lo = 3 if self._axis else 2
        self._i4 = np.where(order4[lo:])[0] + lo
        self._h4 = h[self._i4 - 1] if self._i4.size else np.empty(0)
        # 3-point nonuniform weights
        w1 = np.zeros((n, 3))
        w2 = np.zeros((n, 3))
        i = np.arange(1, n - 1)
        a = r[i] - r[i - 1]
        b = r[i + 1] - r[i]
        w1[i, 0] = -b / (a * (a + b))
        w1[i, 1] = (b - a) / (a * b)
        w1[i, 2] = a / (b * (a + b))
        w2[i, 0] = 2 / (a * (a + b))
        w2[i, 1] = -2 / (a * b)
        w2[i, 2] = 2 / (b * (a + b))
        self._w1, self._w2 = w1, w2

    @property
    def has_axis(self):
        return self._axis

    def d1(self, f, parity=EVEN):
        n, h = self.n, self.h
        out = np.empty(n)
        out[1:-1] = (self._w1[1:-1, 0] * f[:-2] + self._w1[1:-1, 1] * f[1:-1]
                     + self._w1[1:-1, 2] * f[2:])
        j, hj = self._i4, self._h4
        if j.size:
            out[j] = (f[j - 2] - 8 * f[j - 1] + 8 * f[j + 1] - f[j + 2]) / (12 * hj)
        if self._axis:
            if self.axis_uniform:
                ha = self.h_axis
                g = np.concatenate([parity * f[2:0:-1], f[: 5]])
                for i in range(3):
                    gi = i + 2
                    out[i] = (g[gi - 2] - 8 * g[gi - 1] + 8 * g[gi + 1] - g[gi + 2]) / (12 * ha)
            else:
                out[0] = 0.0 if parity == EVEN else f[1] / self.r[1]
        elif self.left_uniform:
            ha = h[0]
            out[0] = np.dot([-25.0, 48.0, -36.0, 16.0, -3.0], f[:5]) / (12 * ha)
            out[1] = np.dot([-3.0, -10.0, 18.0, -6.0, 1.0], f[:5]) / (12 * ha)
        else:
            out[0] = (f[1] - f[0]) / h[0]
        if self.edge_uniform:
            he = h[-1]
            out[-1] = np.dot([3.0, -16.0, 36.0, -48.0, 25.0], f[-5:]) / (12 * he)
            out[-2] = np.dot([-1.0, 6.0, -18.0, 10.0, 3.0], f[-5:]) / (12 * he)
        else:
            out[-1] = (f[-1] - f[-2]) / h[-1]
        return out

    def d2(self, f, parity=EVEN):
        n = self.n
        out = np.empty(n)
        out[1:-1] = (self._w2[1:-1, 0] * f[:-2] + self._w2[1:-1, 1] * f[1:-1]
                     + self._w2[1:-1, 2] * f[2:])
        j, hj = self._i4, self._h4
        if j.size:
            out[j] = (-f[j - 2] + 16 * f[j - 1] - 30 * f[j] + 16 * f[j + 1]
                      - f[j + 2]) / (12 * hj * hj)
        if self._axis:
            if self.axis_uniform:
                ha = self.h_axis
                g = np.concatenate([parity * f[2:0:-1], f[: 5]])
                for i in range(3):
                    gi = i + 2
                    out[i] = (-g[gi - 2] + 16 * g[gi - 1] - 30 * g[gi] + 16 * g[gi + 1]
                              - g[gi + 2]) / (12 * ha * ha)
            else:
                if parity == ODD:
                    out[0] = 0.0
                else:
                    out[0] = 2 * (f[1] - f[0]) / self.r[1] ** 2
        elif self.left_uniform:
            ha = self.h[0]
            out[0] = np.dot([35.0, -104.0, 114.0, -56.0, 11.0], f[:5]) / (12 * ha * ha)
            out[1] = np.dot([11.0, -20.0, 6.0, 4.0, -1.0], f[:5]) / (12 * ha * ha)
        else:
            out[0] = out[1]
        if self.edge_uniform:
            he = self.h[-1]
            out[-1] = np.dot([11.0, -56.0, 114.0, -104.0, 35.0], f[-5:]) / (12 * he * he)
            out[-2] = np.dot([-1.0, 4.0, 6.0, -20.0, 11.0], f[-5:]) / (12 * he * he)
        else:
            out[-1] = out[-2]
        return out


def cumulative_arclength(r, a, s0=0.0):
    """s(r) = s0 + integral of the lapse, trapezoid on the given grid."""
    s = np.empty_like(np.asarray(r, dtype=float))
    s[0] = s0
    s[1:] = s0 + np.cumsum(0.5 * (a[1:] + a[:-1]) * np.diff(r))
    return s
