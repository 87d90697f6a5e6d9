import numpy as np
import pytest

from boltflow.grids import EVEN, ODD, RadialOps, graded_grid, cumulative_arclength


def test_graded_grid_structure():
    r = graded_grid(10.0, 0.01, 0.1, 1.0, 3.0)
    h = np.diff(r)
    assert r[0] == 0.0
    assert np.all(h > 0)
    assert np.allclose(h[:50], 0.01)
    assert np.allclose(h[-5:], h[-1])


def test_graded_grid_rejects_bad_params():
    with pytest.raises(ValueError):
        graded_grid(10.0, 0.1, 0.01, 1.0, 3.0)


@pytest.mark.parametrize("parity,f,df", [
    (EVEN, lambda s: np.cos(s), lambda s: -np.sin(s)),
    (ODD, lambda s: np.sin(s), lambda s: np.cos(s)),
])
def test_d1_fourth_order_with_parity(parity, f, df):
    errs = []
    for n in (101, 201):
        s = np.linspace(0, 2.0, n)
        ops = RadialOps(s)
        err = np.max(np.abs(ops.d1(f(s), parity) - df(s))[:-2])
        errs.append(err)
    order = np.log2(errs[0] / errs[1])
    assert order > 3.5


@pytest.mark.parametrize("parity,f,d2f", [
    (EVEN, lambda s: np.cos(s), lambda s: -np.cos(s)),
    (ODD, lambda s: np.sin(s), lambda s: -np.sin(s)),
])
def test_d2_fourth_order_with_parity(parity, f, d2f):
    errs = []
    for n in (101, 201):
        s = np.linspace(0, 2.0, n)
        ops = RadialOps(s)
        err = np.max(np.abs(ops.d2(f(s), parity) - d2f(s))[:-2])
        errs.append(err)
    order = np.log2(errs[0] / errs[1])
    assert order > 3.5


def test_nonuniform_fallback_second_order():
    errs = []
    for n in (200, 400):
        x = np.linspace(0.0, 1.0, n) ** 1.5 * 2.0
        x[0] = 0.0
        ops = RadialOps(x)
        f = np.cos(x)
        err = np.max(np.abs(ops.d2(f, EVEN) + np.cos(x))[1:-2])
        errs.append(err)
    assert errs[1] < errs[0] / 2.5


def test_arclength_trapezoid():
    r = np.linspace(0, 2, 2001)
    a = 1.0 + r**2
    s = cumulative_arclength(r, a)
    assert abs(s[-1] - (2 + 8 / 3)) < 1e-5
    s5 = cumulative_arclength(r, a, s0=5.0)
    assert abs(s5[0] - 5.0) == 0.0


def test_rejects_non_monotone_grid():
    r = np.array([0.0, 1.0, 0.5, 2.0, 3.0, 4.0, 5.0])
    with pytest.raises(ValueError):
        RadialOps(r)
