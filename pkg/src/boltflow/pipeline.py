"""The end-to-end experiment: glued slice, perturbed collapse, blow-up
diagnostics, surgery, and relaxation toward the mass-matched Taub-NUT
member.  Returns all stage artifacts; optionally emits snapshots, series
files and figures along the way.
"""
from __future__ import annotations

import numpy as np

from .flow import FlowState, detect_singularity, nut_residual, simulate
from .grids import graded_grid
from .initial_data import GlueConfig, build_G0, perturb
from .profile import class_check, curvature, mass, resample_arclength
from .reference import fik_shoot
from .spectral import eigensolve
from .surgery import excise_and_cap, surgery_admissible


class StageFailure(RuntimeError):
    def __init__(self, stage, err):
        super().__init__(f"stage {stage!r} failed: {err}")
        self.stage = stage
        self.cause = err


def glue_config_from(cfg):
    alpha = cfg["glue.alpha"] if cfg["glue.alpha"] > 0 else None
    return GlueConfig(gamma0=cfg["glue.gamma0"], t0=cfg["glue.t0"],
                      Gamma0=cfg["glue.Gamma0"], p_bar=cfg["glue.p_bar"],
                      alpha=alpha, bolt_n=cfg["glue.bolt_n"])


def flow_grid_from(cfg):
    return graded_grid(cfg["grid.s_max"], cfg["grid.h_min"], cfg["grid.h_max"],
                       cfg["grid.r_fine"], cfg["grid.r_coarse"])


def mass_window_from(cfg):
    gc = glue_config_from(cfg)
    return (1.05 * 3 * gc.R3, cfg["grid.s_max"])


def background_from(cfg):
    return fik_shoot(s_far=cfg["fik.s_far"], core_h=cfg["fik.core_h"],
                     core_max=cfg["fik.core_max"], tail_nodes=cfg["fik.tail_nodes"])


def singular_flow(cfg, state, threshold, mass_window, ext_marker,
                  on_record=None, bolt_floor=None):
    """Three-leg march into the singular regime.

    The coarse leg stops well before the blow-up threshold; the fine
    cadence legs catch the threshold crossing within a few steps of it
    (the collapse crosses the final decade of curvature growth in a few
    hundred steps, so a coarse cadence would race the solver into the
    singular time).  The middle leg stops when the bolt reaches the last
    comfortably resolved size and the state there is kept as the "final
    resolvable" snapshot for profile comparisons.
    """
    kw = dict(cfl=cfg["flow.cfl"], s_inner=cfg["flow.s_inner"],
              ext_marker=ext_marker, mu=cfg["flow.mu"], nu=cfg["flow.nu"],
              mass_window=mass_window, on_record=on_record)
    state = simulate(state, t_end=cfg["flow.t_end"],
                     monitor_every=cfg["flow.monitor_every"],
                     stop_max_rm=threshold / 20.0, **kw)
    state = simulate(state, t_end=cfg["flow.t_end"], monitor_every=10,
                     stop_max_rm=threshold,
                     stop_bolt_below=12 * cfg["grid.h_min"], **kw)
    resolvable = state.copy_shallow()
    if bolt_floor is None:
        bolt_floor = 4 * cfg["grid.h_min"]
    if state.history[-1][2] < threshold:
        state = simulate(state, t_end=cfg["flow.t_end"], monitor_every=10,
                         stop_max_rm=threshold, stop_bolt_below=bolt_floor, **kw)
    return state, resolvable


def run(cfg, bg=None, spectrum=None, on_stage=None, on_record=None,
        on_record_post=None):
    """Run glue -> perturb -> flow -> detect -> surgery -> flow.

    Returns a dict of artifacts keyed by stage.  ``on_stage(name, data)``
    is called as stages complete (the CLI uses it to emit files).
    """
    art = {}

    def done(name, **data):
        art.update(data)
        if on_stage:
            on_stage(name, art)

    stage = "background"
    try:
        if bg is None:
            bg = background_from(cfg)
        art["bg"] = bg

        stage = "glue"
        gc = glue_config_from(cfg)
        grid = flow_grid_from(cfg)
        g0 = build_G0(bg, gc, grid)
        mwin = mass_window_from(cfg)
        done("glue", gc=gc, g0=g0, mass_window=mwin,
             mass_initial=mass(g0, window=mwin))

        stage = "perturb"
        p1 = cfg["perturb.p1"]
        if p1 != 0.0:
            if spectrum is None:
                spectrum = eigensolve(bg, count=cfg["spectrum.count"],
                                      n_nodes=cfg["spectrum.nodes"],
                                      s_max=cfg["spectrum.s_max"])
            gp = perturb(g0, bg, gc, spectrum, [p1])
        else:
            gp = g0
        done("perturb", gp=gp, spectrum=spectrum)

        stage = "flow"
        rm0 = float(np.max(curvature(gp).riem_norm))
        threshold = cfg["flow.threshold_factor"] * rm0
        state = FlowState(profile=gp, t=gc.t0)
        state, resolvable = singular_flow(cfg, state, threshold, mwin, 3 * gc.R3,
                                          on_record=on_record)
        done("flow", state=state, resolvable=resolvable, rm0=rm0,
             threshold=threshold, rm_growth=state.history[-1][2] / rm0)

        stage = "detect"
        rep = detect_singularity(state, threshold=threshold,
                                 theta=cfg["flow.theta"], bg_u=bg.u_of,
                                 rescale_inner=cfg["flow.rescale_inner"])
        # the model comparison happens at the last resolved snapshot
        from .flow import blowup_rescale
        _, u_dist = blowup_rescale(resolvable.profile, rep.T_hat, resolvable.t,
                                   bg.u_of, cfg["flow.rescale_inner"])
        rep.rescaled_u_distance = float(u_dist)
        done("detect", blowup=rep)

        stage = "surgery"
        R_bar = max(cfg["surgery.r_bar_factor"] * rep.blowup_R,
                    cfg["surgery.r_bar_min"])
        ok, why = surgery_admissible(rep, state.profile, R_bar)
        if not ok:
            raise StageFailure("surgery", why)
        pr = resample_arclength(state.profile, n_nodes=4000)
        cut, srep = excise_and_cap(pr, R_bar, blowup_R=rep.blowup_R,
                                   mass_window=mwin)
        done("surgery", capped=cut, surgery_report=srep, R_bar=R_bar)

        stage = "post_flow"
        st2 = FlowState(profile=cut, t=0.0)
        st2 = simulate(st2, t_end=cfg["post.t_end"],
                       monitor_every=cfg["post.monitor_every"],
                       cfl=cfg["flow.cfl"], s_inner=cfg["flow.s_inner"],
                       mass_window=mwin, on_record=on_record_post)
        nres = nut_residual(st2.profile, cfg["flow.s_inner"])
        m_final = mass(st2.profile, window=mwin)
        done("post_flow", post_state=st2, nut_residual_final=nres,
             mass_final=m_final,
             nut_converged=nres < cfg["post.nut_tol"])
    except StageFailure:
        raise
    except Exception as err:
        raise StageFailure(stage, err) from err
    return art
