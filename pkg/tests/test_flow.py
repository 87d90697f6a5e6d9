import numpy as np
import pytest

from boltflow.flow import (AxisRegularityError, FlowOps, FlowState,
                           NoSingularityError, blowup_rescale,
                           detect_singularity, monitor_record, nut_residual,
                           running_T_hat, simulate, step)
from boltflow.profile import (InvalidProfileError, Profile, Topology,
                              class_check, curvature, derivatives)
from boltflow.reference import taub_bolt, taub_nut


def test_rhs_vanishes_on_ricci_flat():
    for prof in (taub_nut(1.0, s_max=30.0, nodes=1001),
                 taub_bolt(1.0, s_max=30.0, nodes=1001)):
        fops = FlowOps(prof.r, prof.topology)
        at, bt, ct = fops.rhs(prof.a, prof.b, prof.c)
        assert np.max(np.abs(bt)) < 5e-4
        assert np.max(np.abs(ct)) < 5e-4
        assert np.max(np.abs(at)) < 5e-4


def test_rhs_constant_coefficient_formula():
    # on locally constant data the parabolic terms drop out pointwise
    n = 401
    s = np.linspace(2.0, 6.0, n)
    b0, c0 = 1.7, 0.9
    p = Profile(topology=Topology.BOLT, r=s, a=np.ones(n),
                b=np.full(n, b0), c=np.full(n, c0), s0=2.0)
    fops = FlowOps(p.r, p.topology)
    at, bt, ct = fops.rhs(p.a, p.b, p.c)
    i = slice(5, -5)
    assert np.allclose(bt[i], 2 * c0**2 / b0**3 - 4 / b0, atol=1e-10)
    assert np.allclose(ct[i], -2 * c0**3 / b0**4, atol=1e-10)


def test_zero_steps_is_identity(tb_ref):
    st = FlowState(profile=tb_ref, t=0.0)
    out = simulate(st, stop_after_steps=0, monitor_every=10)
    assert out.t == 0.0
    assert out.step_index == 0
    assert np.array_equal(out.profile.b, tb_ref.b)


def test_ricci_flat_drift_small():
    prof = taub_bolt(1.0, s_max=30.0, nodes=801)
    fops = FlowOps(prof.r, prof.topology)
    at, bt, ct = fops.rhs(prof.a, prof.b, prof.c)
    t_end = 0.02
    disc = t_end * max(np.max(np.abs(bt)), np.max(np.abs(ct)))
    st = simulate(FlowState(profile=prof, t=0.0), t_end=t_end, monitor_every=200)
    drift = max(np.max(np.abs(st.profile.b - prof.b)),
                np.max(np.abs(st.profile.c - prof.c)))
    assert drift < 5 * disc


def test_class_preserved_along_flow(tb_ref):
    st = FlowState(profile=taub_bolt(1.0, s_max=30.0, nodes=601), t=0.0)
    st = simulate(st, stop_after_steps=400, monitor_every=100)
    assert class_check(st.profile).ok


def test_step_rejects_bad_state():
    n = 501
    s = np.linspace(0, 10, n)
    b = np.full(n, 2.0)
    b[100] = 0.0     # division blows up in the rhs
    c = s.copy()
    p = Profile(topology=Topology.BOLT, r=s, a=np.ones(n), b=b, c=c)
    fops = FlowOps(p.r, p.topology)
    with pytest.raises(AxisRegularityError):
        step(FlowState(profile=p, t=0.0), fops)


def test_running_T_hat_recovers_linear_law():
    T = 1.37
    hist = []
    for t in np.linspace(1.0, 1.33, 40):
        rec = [t, 1e-4, 1.0 / (T - t)] + [0.0] * 15
        hist.append(tuple(rec))
    that = running_T_hat(hist)
    assert abs(that - T) < 1e-10


def test_detect_singularity_guard(tb_ref):
    st = FlowState(profile=tb_ref, t=0.0)
    st = simulate(st, stop_after_steps=100, monitor_every=20)
    with pytest.raises(NoSingularityError):
        detect_singularity(st, threshold=1e9)


def test_blowup_rescale_identity(bg):
    # data equal to the scaled shrinker is at distance zero from it
    T, t = 1.0, 0.84
    lam = np.sqrt(T - t)
    s = np.arange(0.0, 10.0, 0.005)
    vals = bg.eval(s / lam)
    p = Profile(topology=Topology.BOLT, r=s, a=np.ones(s.size),
                b=lam * vals[0], c=lam * vals[1])
    _, dist = blowup_rescale(p, T, t, bg.u_of, inner=6.0)
    assert dist < 1e-10
    with pytest.raises(ValueError):
        blowup_rescale(p, t, T, bg.u_of)


def test_nut_residual_eigenstates(tn_ref):
    assert nut_residual(tn_ref, s_inner=20.0) < 5e-6
    n = 1601
    s = np.linspace(0, 40, n)
    flat = Profile(topology=Topology.NUT, r=s, a=np.ones(n), b=s.copy(), c=s.copy())
    assert nut_residual(flat, s_inner=20.0) < 1e-10
    with pytest.raises(InvalidProfileError):
        nut_residual(taub_bolt(1.0, s_max=20.0, nodes=801), s_inner=5.0)


def test_monitor_record_columns(tb_ref):
    from boltflow.flow import MONITOR_COLUMNS
    fops = FlowOps(tb_ref.r, tb_ref.topology)
    st = FlowState(profile=tb_ref, t=0.0)
    st.c_tv = np.zeros(tb_ref.r.size)
    rec = monitor_record(st, fops, ext_marker=100.0)
    assert len(rec) == len(MONITOR_COLUMNS)
    assert rec[0] == 0.0
    assert rec[3] == tb_ref.bolt_size
