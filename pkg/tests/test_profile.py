import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boltflow.profile import (ClassReport, InvalidProfileError, Profile,
                              ResolutionError, Topology,
                              UnclassifiableTailError, class_check, curvature,
                              derivatives, mass, max_ricci, resample_arclength,
                              scale)
from boltflow.reference import cone_fik, taub_bolt, taub_nut, taub_nut_r_gauge


def flat_profile(n=1601, smax=40.0):
    s = np.linspace(0, smax, n)
    return Profile(topology=Topology.NUT, r=s, a=np.ones(n), b=s.copy(), c=s.copy())


def test_flat_space_is_flat():
    fr = curvature(flat_profile())
    for name in ("K01", "K03", "K12", "K13", "W"):
        assert np.max(np.abs(getattr(fr, name))) < 1e-10


def test_frame_symmetry_structural():
    fr = curvature(taub_bolt(1.0, s_max=30.0, nodes=801))
    assert np.array_equal(fr.K01, fr.K02)
    assert np.array_equal(fr.K13, fr.K23)
    assert np.array_equal(fr.Ric00, 2 * fr.K01 + fr.K03)
    assert np.array_equal(fr.Ric11, fr.K01 + fr.K12 + fr.K13)
    assert np.array_equal(fr.Ric33, fr.K03 + 2 * fr.K13)


def test_cone_curvature_closed_form():
    cone = cone_fik(0.5, 60.0, 2001)
    fr = curvature(cone)
    pred = (4 * np.sqrt(2) - 4) / cone.r**2
    assert np.max(np.abs(fr.K12 - pred)) < 1e-10
    # the shrinker cone is curvature-free in the (e1, e3) planes
    assert np.max(np.abs(fr.K13)) < 1e-10
    u = cone.c / cone.b
    assert np.max(np.abs(u - 2.0**-0.25)) < 1e-14


def test_ricci_flat_references_converge():
    errs_tn = [max_ricci(taub_nut(1.0, s_max=30.0, nodes=n)) for n in (501, 1001)]
    errs_tb = [max_ricci(taub_bolt(1.0, s_max=30.0, nodes=n)) for n in (501, 1001)]
    assert np.log2(errs_tn[0] / errs_tn[1]) > 1.8
    assert np.log2(errs_tb[0] / errs_tb[1]) > 1.8


@settings(max_examples=12, deadline=None)
@given(alpha=st.floats(min_value=0.3, max_value=3.0,
                       allow_nan=False, allow_infinity=False))
def test_scale_covariance(alpha):
    p = taub_bolt(1.0, s_max=30.0, nodes=501)
    fr = curvature(p)
    fr2 = curvature(scale(p, alpha))
    assert np.allclose(fr2.riem_norm, fr.riem_norm / alpha**2, rtol=1e-9, atol=1e-12)


def test_mass_oracles(tn_ref, tb_ref):
    assert abs(mass(tn_ref) - 0.25) < 1e-3
    assert abs(mass(tb_ref) - 0.25) < 1e-3


def test_mass_scaling(tb_ref):
    m = mass(tb_ref)
    assert abs(mass(scale(tb_ref, 2.0)) - m / 2) < 1e-12


def test_mass_flat_is_zero():
    assert mass(flat_profile()) == 0.0


def test_mass_oscillating_tail_rejected():
    n = 2001
    s = np.linspace(0, 60, n)
    c = s.copy()
    tail = s > 30
    c[tail] = 30 + 2 * np.sin(3 * (s[tail] - 30))
    p = Profile(topology=Topology.NUT, r=s, a=np.ones(n), b=s + 1e-9, c=np.abs(c) + 1e-9)
    with pytest.raises(UnclassifiableTailError):
        mass(p)


def test_class_check_references(tn_ref, tb_ref):
    rep = class_check(tn_ref)
    assert rep.ok and rep.u_max <= 1 + 1e-9
    assert rep.decay_exponent > 2.5
    rep = class_check(tb_ref)
    assert rep.ok


def test_class_check_detects_violation(tb_ref):
    bad = Profile(topology=tb_ref.topology, r=tb_ref.r, a=tb_ref.a,
                  b=tb_ref.b, c=1.2 * tb_ref.b)
    rep = class_check(bad)
    assert rep.u_max > 1.0
    assert not rep.passes["u_le_1"]


def test_taub_nut_slope_identities(tn_ref):
    bs, cs, _, _ = derivatives(tn_ref)
    u = np.zeros_like(tn_ref.r)
    i = tn_ref.interior()
    u[i] = tn_ref.c[i] / tn_ref.b[i]
    u[0] = 1.0
    err = np.abs(bs - (2 - u)) + np.abs(cs - u**2)
    assert np.max(err[:-2]) < 5e-6


def test_resample_identity_on_unit_lapse(tb_ref):
    out = resample_arclength(tb_ref)
    assert np.allclose(out.b, tb_ref.b, atol=1e-10)
    assert np.allclose(out.c, tb_ref.c, atol=1e-10)


def test_resample_taub_nut_r_gauge():
    p = taub_nut_r_gauge(1.0, r_min=0.5, r_max=120.0, nodes=24001)
    out = resample_arclength(p)
    bs, cs, _, _ = derivatives(out)
    u = out.c / out.b
    err = np.abs(bs - (2 - u)) + np.abs(cs - u**2)
    assert np.max(err) < 1e-6


def test_resample_scaling(tb_ref):
    alpha = 1.7
    out = resample_arclength(scale(tb_ref, alpha))
    ref = resample_arclength(tb_ref)
    # s, b, c all scale together
    assert abs(out.s[-1] - alpha * ref.s[-1]) < 1e-8
    assert np.allclose(out.b, alpha * np.interp(out.s / alpha, ref.s, ref.b),
                       rtol=0, atol=2e-5)


def test_invalid_profiles_rejected():
    s = np.linspace(0, 10, 101)
    with pytest.raises(InvalidProfileError):
        Profile(topology=Topology.NUT, r=s[::-1], a=np.ones(101), b=s, c=s)
    p = Profile(topology=Topology.BOLT, r=s, a=np.ones(101), b=np.ones(101) - 2, c=s)
    with pytest.raises(InvalidProfileError):
        curvature(p)
    with pytest.raises(ResolutionError):
        tiny = np.linspace(0, 1, 5)
        curvature(Profile(topology=Topology.NUT, r=tiny, a=np.ones(5),
                          b=tiny, c=tiny))
