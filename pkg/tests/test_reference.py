import numpy as np
import pytest

from boltflow.profile import Profile, Topology, curvature, derivatives
from boltflow.reference import (ParameterError, cone_fik, fik_shoot,
                                fs_consistency, kahler_residual,
                                soliton_residual, taub_bolt, taub_nut,
                                taub_nut_r_gauge)


def test_taub_nut_coefficients_at_r2():
    # direct evaluation of the closed form at n = 1, r = 2
    n, r = 1.0, 2.0
    assert 4 * r * (r + 2 * n) == 32.0
    assert 16 * n**2 * r / (r + 2 * n) == 8.0
    p = taub_nut_r_gauge(1.0, r_min=1.0, r_max=10.0, nodes=901)
    k = np.argmin(np.abs(p.r - 2.0))
    assert abs(p.b[k] ** 2 - 32.0) < 1e-12
    assert abs(p.c[k] ** 2 - 8.0) < 1e-12


def test_taub_nut_rescaling_relation():
    # pullback by r -> (n/m) r of the n-member equals (n/m)^2 times the m-member
    n, m = 2.0, 0.5
    r = np.linspace(0.3, 8.0, 101)
    rho = (n / m) * r
    b2_n = 4 * rho * (rho + 2 * n)
    c2_n = 16 * n**2 * rho / (rho + 2 * n)
    a2_n = (rho + 2 * n) / rho
    b2_m = 4 * r * (r + 2 * m)
    c2_m = 16 * m**2 * r / (r + 2 * m)
    a2_m = (r + 2 * m) / r
    k = (n / m) ** 2
    assert np.allclose(b2_n, k * b2_m)
    assert np.allclose(c2_n, k * c2_m)
    # dr-part picks up the Jacobian of the pullback
    assert np.allclose(a2_n * k, k * a2_m)


def test_taub_bolt_axis_behaviour():
    p = taub_bolt(1.0, s_max=20.0, nodes=2001)
    assert abs(p.b[0] - 2 * np.sqrt(3)) < 1e-10
    bs, cs, _, _ = derivatives(p)
    assert abs(cs[0] - 1.0) < 1e-6
    assert abs(bs[0]) < 1e-8


def test_parameter_validation():
    with pytest.raises(ParameterError):
        taub_nut(-1.0)
    with pytest.raises(ParameterError):
        taub_bolt(0.0)
    with pytest.raises(ParameterError):
        cone_fik(0.0)


def test_fik_background(bg):
    assert abs(bg.bolt_size - 2.0) < 1e-12
    assert bg.delta > 0.1
    assert soliton_residual(bg) < 1e-6
    # the identity is enforced in the construction variables ...
    s = bg.profile.s
    b, c, bs, *_ = bg.eval(s)
    i = s > 0
    assert np.max(np.abs(bs[i] - c[i] / b[i])) < 1e-12
    # ... and holds for finite differences of the stored profile
    assert kahler_residual(bg) < 1e-5
    p = bg.profile
    assert abs(p.b[-1] / p.s[-1] - 2.0**-0.25) < 1e-3
    assert abs(p.c[-1] / p.s[-1] - 2.0**-0.5) < 1e-3


def test_fik_fs_recovery_consistency(bg):
    assert fs_consistency(bg) < 1e-4


def test_fik_taub_nut_steady_variant(tn_ref):
    # Ricci-flat data with f = 0 solves the steady (lambda = 0) equation
    class Shim:
        profile = tn_ref
        f_s = np.zeros(tn_ref.r.size)
        lam = 0.0
    assert soliton_residual(Shim(), lam=0.0) < 2e-5


def test_fik_self_similar_residual_scaling(bg):
    # sqrt(1-t) (b,c)(s/sqrt(1-t)) solves the soliton equation with
    # lambda/(1-t); its residual matches the unscaled one rescaled.
    t = 0.64
    lam = np.sqrt(1 - t)
    s = np.arange(0.0, 12.0, 0.004)
    vals = bg.eval(s / lam)
    prof = Profile(topology=Topology.BOLT, r=s, a=np.ones(s.size),
                   b=lam * vals[0], c=lam * vals[1])

    class Shim:
        profile = prof
        f_s = vals[6] / lam
        lam_ = None
    shim = Shim()
    res_scaled = soliton_residual(shim, lam=0.5 / (1 - t))
    assert res_scaled < 1e-5 / (1 - t)


def test_cone_asymptotics_of_background(bg):
    # u approaches the cone ratio from below, never exceeding 1 - delta
    s = np.linspace(0.5, 30, 500)
    u = bg.u_of(s)
    assert np.all(u <= 1 - bg.delta + 1e-12)
    assert abs(u[-1] - 2.0**-0.25) < 2e-3
