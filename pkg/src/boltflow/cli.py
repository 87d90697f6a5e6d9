"""Command-line front end.

Subcommands mirror the pipeline stages: reference metrics, the shrinker
spectrum, glued data construction, perturbation, flow, surgery, the full
collapse-surgery-relaxation pipeline, the collapse/escape bisection, and
invariant checking of recorded runs.  Every command writes delimited text
plus rendered figures into --out, together with a manifest that pins the
resolved configuration.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import plots
from .flow import (FlowState, detect_singularity, nut_residual, simulate)
from .grids import graded_grid
from .initial_data import GlueConfig, build_G0, glue_cone_to_bolt, perturb
from .manifest import ConfigError, RunManifest, load_config
from .monitors import BoxParams, box_shoot, invariant_suite
from .profile import class_check, curvature, mass, resample_arclength
from .reference import (cone_fik, fik_shoot, kahler_residual, soliton_residual,
                        taub_bolt, taub_nut)
from .snapshots import (SeriesWriter, load_checkpoint, read_profile, read_series,
                        save_checkpoint, write_background, write_eigentensor,
                        write_profile, write_series, write_spectrum)
from .spectral import eigensolve, hessian_f, ricci_tensor, _operator


class StageFailure(RuntimeError):
    def __init__(self, stage, err):
        super().__init__(f"stage {stage!r} failed: {err}")
        self.stage = stage


def _outdir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _path(args, name):
    return os.path.join(args.out, name)


def _background(cfg):
    return fik_shoot(s_far=cfg["fik.s_far"], core_h=cfg["fik.core_h"],
                     core_max=cfg["fik.core_max"], tail_nodes=cfg["fik.tail_nodes"])


def _glue_config(cfg):
    alpha = cfg["glue.alpha"] if cfg["glue.alpha"] > 0 else None
    return GlueConfig(gamma0=cfg["glue.gamma0"], t0=cfg["glue.t0"],
                      Gamma0=cfg["glue.Gamma0"], p_bar=cfg["glue.p_bar"],
                      alpha=alpha, bolt_n=cfg["glue.bolt_n"])


def _flow_grid(cfg):
    return graded_grid(cfg["grid.s_max"], cfg["grid.h_min"], cfg["grid.h_max"],
                       cfg["grid.r_fine"], cfg["grid.r_coarse"])


def _mass_window(cfg):
    gc = _glue_config(cfg)
    return (1.05 * 3 * gc.R3, cfg["grid.s_max"])


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_reference(args, cfg, man):
    fam = args.family or cfg["reference.family"]
    n = args.n if args.n is not None else cfg["reference.n"]
    s_max, nodes = cfg["reference.s_max"], cfg["reference.nodes"]
    if fam == "nut":
        p = taub_nut(n, s_max=s_max, nodes=nodes)
    elif fam == "bolt":
        p = taub_bolt(n, s_max=s_max, nodes=nodes)
    elif fam == "cone":
        p = cone_fik(0.5, s_max, nodes)
    elif fam == "fik":
        bg = _background(cfg)
        write_background(_path(args, "fik_background.dat"), bg)
        man.outcome_line("soliton_residual", soliton_residual(bg))
        man.outcome_line("kahler_residual_enforced", kahler_residual_enforced(bg))
        man.outcome_line("bolt_size", bg.bolt_size)
        man.outcome_line("c3", bg.c3)
        man.outcome_line("delta", bg.delta)
        plots.plot_profile(_path(args, "fik_profile.png"), bg.profile,
                           title="shrinker background")
        return 0
    else:
        raise ConfigError(f"unknown family {fam!r}")
    name = f"{fam}_n{n:g}"
    write_profile(_path(args, name + ".dat"), p, with_curvature=True)
    rep = class_check(p)
    man.outcome_line("mass", rep.mass)
    man.outcome_line("u_max", rep.u_max)
    man.outcome_line("decay_exponent", rep.decay_exponent)
    man.outcome_line("class_pass", rep.ok)
    plots.plot_profile(_path(args, name + ".png"), p, title=name)
    plots.plot_curvature(_path(args, name + "_curvature.png"), p, curvature(p),
                         title=name)
    return 0


def kahler_residual_enforced(bg):
    """|b_s - c/b| with b_s taken from the construction itself."""
    s = bg.profile.s
    b, c, bs, *_ = bg.eval(s)
    i = s > 0
    return float(np.max(np.abs(bs[i] - c[i] / b[i])))


def cmd_spectrum(args, cfg, man):
    bg = _background(cfg)
    nn, sm, count = cfg["spectrum.nodes"], cfg["spectrum.s_max"], cfg["spectrum.count"]
    res = eigensolve(bg, count=count, n_nodes=nn, s_max=sm)
    write_spectrum(_path(args, "spectrum.dat"), res)
    for j, T in enumerate(res.eigentensors, 1):
        write_eigentensor(_path(args, f"eigentensor_{j:02d}.dat"), T)
    op = _operator(bg, nn, sm)
    ric = ricci_tensor(bg, nn, sm)
    hes = hessian_f(bg, nn, sm)
    Lric = op.apply(ric)
    Lhes = op.apply(hes)

    def rel(T, LT, lam):
        diff = type(T)(s=T.s, h00=LT.h00 - lam * T.h00, h11=LT.h11 - lam * T.h11,
                       h33=LT.h33 - lam * T.h33, h03=LT.h03 - lam * T.h03)
        return op.norm(diff) / op.norm(T)

    man.outcome_line("eigenvalues", ",".join("%.8f" % v for v in res.eigenvalues))
    man.outcome_line("K_nonnegative", res.K)
    man.outcome_line("lambda_star", res.lambda_star)
    man.outcome_line("ric_identity_residual", rel(ric, Lric, 1.0))
    man.outcome_line("hess_identity_residual", rel(hes, Lhes, 0.0))
    plots.plot_spectrum(_path(args, "spectrum.png"), res)
    return 0


def cmd_glue(args, cfg, man):
    gc = _glue_config(cfg)
    grid = np.linspace(gc.R3 / 8, cfg["grid.s_max"], 4001)
    p = glue_cone_to_bolt(gc.R3, grid, alpha=gc.alpha, bolt_n=gc.bolt_n)
    write_profile(_path(args, "glued_background.dat"), p, with_curvature=True)
    rep = class_check(p)
    man.outcome_line("class_pass", rep.ok)
    man.outcome_line("u_max", rep.u_max)
    man.note("R3", gc.R3)
    plots.plot_profile(_path(args, "glued_background.png"), p,
                       title="cone glued into Bolt")
    return 0


def _build_slice(cfg, bg, with_perturbation):
    gc = _glue_config(cfg)
    grid = _flow_grid(cfg)
    g0 = build_G0(bg, gc, grid)
    if not with_perturbation or cfg["perturb.p1"] == 0.0:
        return gc, g0, g0, None
    res = eigensolve(bg, count=cfg["spectrum.count"],
                     n_nodes=cfg["spectrum.nodes"], s_max=cfg["spectrum.s_max"])
    gp = perturb(g0, bg, gc, res, [cfg["perturb.p1"]])
    return gc, g0, gp, res


def cmd_perturb(args, cfg, man):
    bg = _background(cfg)
    gc, g0, gp, res = _build_slice(cfg, bg, with_perturbation=True)
    write_profile(_path(args, "slice_g0.dat"), g0)
    write_profile(_path(args, "slice_gp.dat"), gp)
    man.outcome_line("bolt_g0", g0.bolt_size)
    man.outcome_line("bolt_gp", gp.bolt_size)
    man.outcome_line("p1", cfg["perturb.p1"])
    if res is not None:
        man.outcome_line("lambda_1", float(res.eigenvalues[0]))
    plots.plot_profile(_path(args, "slice_gp.png"), gp, title="perturbed slice")
    return 0


def _run_flow(args, cfg, man, state, mass_window, ext_marker, series_name,
              stop_max_rm=None, stop_bolt_below=None, t_end=None,
              monitor_every=None, two_stage=False):
    writer = SeriesWriter(_path(args, series_name), resume_rows=len(state.history))
    kw = dict(cfl=cfg["flow.cfl"], s_inner=cfg["flow.s_inner"],
              ext_marker=ext_marker, mu=cfg["flow.mu"], nu=cfg["flow.nu"],
              mass_window=mass_window, on_record=writer)
    me = monitor_every or cfg["flow.monitor_every"]
    try:
        if two_stage and stop_max_rm is not None:
            state = simulate(state, t_end=t_end, monitor_every=me,
                             stop_max_rm=stop_max_rm / 20.0, **kw)
            state = simulate(state, t_end=t_end, monitor_every=10,
                             stop_max_rm=stop_max_rm,
                             stop_bolt_below=stop_bolt_below, **kw)
        else:
            state = simulate(state, t_end=t_end, monitor_every=me,
                             stop_max_rm=stop_max_rm,
                             stop_bolt_below=stop_bolt_below, **kw)
    finally:
        writer.close()
    return state


def cmd_simulate(args, cfg, man):
    mass_window = _mass_window(cfg)
    if args.resume:
        state = load_checkpoint(args.resume)
        rows = len(state.history)
        man.note("resumed_from", args.resume)
    elif args.profile:
        p = read_profile(args.profile)
        state = FlowState(profile=p, t=0.0)
        rows = 0
    else:
        bg = _background(cfg)
        gc, g0, gp, _ = _build_slice(cfg, bg, with_perturbation=True)
        state = FlowState(profile=gp, t=gc.t0)
        rows = 0
    ext = 3 * _glue_config(cfg).R3 if not (args.resume or args.profile) else None
    state = _run_flow(args, cfg, man, state, mass_window, ext,
                      "series.dat", t_end=cfg["flow.t_end"])
    write_profile(_path(args, "final_profile.dat"), state.profile)
    save_checkpoint(_path(args, "checkpoint.bin"), state)
    man.outcome_line("t_final", state.t)
    man.outcome_line("steps", state.step_index)
    header, data = read_series(_path(args, "series.dat"))
    plots.plot_series(_path(args, "series.png"), header, data)
    return 0


def cmd_surgery(args, cfg, man):
    if not args.profile:
        raise ConfigError("surgery needs --profile <snapshot>")
    p = read_profile(args.profile)
    if np.max(np.abs(p.a - 1.0)) > 1e-12:
        p = resample_arclength(p, n_nodes=4000)
    R_bar = args.r_bar if args.r_bar else cfg["surgery.r_bar_min"]
    cut, rep = excise_and_cap_wrapper(p, R_bar)
    write_profile(_path(args, "pre_surgery.dat"), p)
    write_profile(_path(args, "post_surgery.dat"), cut)
    for k, v in vars(rep).items():
        man.outcome_line(f"surgery_{k}", v)
    plots.plot_profile(_path(args, "post_surgery.png"), cut, title="capped slice")
    return 0


def excise_and_cap_wrapper(p, R_bar, blowup_R=np.nan):
    from .surgery import excise_and_cap
    return excise_and_cap(p, R_bar, blowup_R=blowup_R)


def cmd_pipeline(args, cfg, man):
    """glue -> perturb -> flow -> detect -> surgery -> flow -> nut residual."""
    from . import pipeline

    w_flow = SeriesWriter(_path(args, "stage2_series.dat"))
    w_post = SeriesWriter(_path(args, "stage5_series.dat"))

    def on_stage(name, art):
        if name == "glue":
            write_profile(_path(args, "stage1_g0.dat"), art["g0"])
            man.note("R1", art["gc"].R1)
            man.note("R3", art["gc"].R3)
            man.outcome_line("mass_initial", art["mass_initial"])
        elif name == "perturb":
            write_profile(_path(args, "stage1_gp.dat"), art["gp"])
        elif name == "flow":
            save_checkpoint(_path(args, "stage2_checkpoint.bin"), art["state"])
            man.outcome_line("flow_t_final", art["state"].t)
            man.outcome_line("rm_growth", art["rm_growth"])
        elif name == "detect":
            rep = art["blowup"]
            for k in ("T_hat", "type_one_sup", "blowup_R", "rescaled_u_distance"):
                man.outcome_line(k, getattr(rep, k))
            iv = invariant_suite(art["state"].history)
            for k, v in iv.passes.items():
                man.outcome_line(f"invariant_{k}", v)
        elif name == "surgery":
            srep = art["surgery_report"]
            write_profile(_path(args, "stage4_capped.dat"), art["capped"])
            man.outcome_line("mass_before_surgery", srep.mass_before)
            man.outcome_line("mass_after_surgery", srep.mass_after)
            man.outcome_line("surgery_class_pass", srep.class_pass)
            man.outcome_line("seam_jump", srep.seam_curvature_jump)
        elif name == "post_flow":
            write_profile(_path(args, "stage5_final.dat"), art["post_state"].profile)
            man.outcome_line("nut_residual_final", art["nut_residual_final"])
            man.outcome_line("mass_final", art["mass_final"])
            man.outcome_line("mass_match",
                             abs(art["mass_final"] - art["surgery_report"].mass_after))
            man.outcome_line("nut_converged", art["nut_converged"])

    try:
        art = pipeline.run(cfg, on_stage=on_stage, on_record=w_flow,
                           on_record_post=w_post)
    except pipeline.StageFailure as err:
        raise StageFailure(err.stage, err.cause) from err
    finally:
        w_flow.close()
        w_post.close()
    for name in ("stage2_series.dat", "stage5_series.dat"):
        header, data = read_series(_path(args, name))
        plots.plot_series(_path(args, name.replace(".dat", ".png")), header, data)
    state, rep, bg = art["state"], art["blowup"], art["bg"]
    lam = np.sqrt(max(rep.T_hat - state.t, 1e-300))
    s_hat = state.profile.s / lam
    m = (s_hat > 0) & (s_hat <= cfg["flow.rescale_inner"])
    u_hat = state.profile.c[m] / state.profile.b[m]
    plots.plot_rescaled_u(_path(args, "rescaled_u.png"), s_hat[m], u_hat,
                          bg.u_of(s_hat[m]), title="collapse vs shrinker")
    return 0


def cmd_shoot(args, cfg, man):
    bg = _background(cfg)
    gc = _glue_config(cfg)
    grid = _flow_grid(cfg)
    g0 = build_G0(bg, gc, grid)
    spec_res = eigensolve(bg, count=cfg["spectrum.count"],
                          n_nodes=cfg["spectrum.nodes"], s_max=cfg["spectrum.s_max"])
    rm0 = float(np.max(curvature(g0).riem_norm))
    t_escape = gc.t0 + cfg["shoot.window"] * (1.0 - gc.t0)
    collapse_rm = 200.0 * rm0
    log_rows = []

    def outcome(pcoef):
        gp = perturb(g0, bg, gc, spec_res, [pcoef]) if pcoef else g0
        st = FlowState(profile=gp, t=gc.t0)
        st = simulate(st, t_end=t_escape, monitor_every=cfg["flow.monitor_every"],
                      stop_max_rm=collapse_rm, stop_bolt_below=10 * cfg["grid.h_min"],
                      cfl=cfg["flow.cfl"], mass_window=_mass_window(cfg))
        rm_end = st.history[-1][2]
        tag = "collapse" if rm_end >= collapse_rm or st.history[-1][3] <= 10 * cfg["grid.h_min"] \
            else "escape"
        info = {"t_exit": st.t, "max_rm": rm_end, "bolt": st.history[-1][3]}
        log_rows.append((pcoef, tag, info["t_exit"], info["max_rm"], info["bolt"]))
        return tag, info

    bracket, runs = box_shoot(outcome, cfg["shoot.p_lo"], cfg["shoot.p_hi"],
                              iters=cfg["shoot.iters"])
    with open(_path(args, "shoot.dat"), "w", encoding="utf-8") as fh:
        fh.write("p outcome t_exit max_rm bolt\n")
        for row in log_rows:
            fh.write("%.17g %s %.17g %.17g %.17g\n"
                     % (row[0], row[1], row[2], row[3], row[4]))
    man.outcome_line("bracket_lo", bracket[0])
    man.outcome_line("bracket_hi", bracket[1])
    man.outcome_line("bracket_width", bracket[1] - bracket[0])
    man.outcome_line("runs", len(runs))
    return 0


def cmd_check(args, cfg, man):
    if not args.series:
        raise ConfigError("check needs --series <file>")
    header, data = read_series(args.series)
    history = [tuple(row) for row in data]
    iv = invariant_suite(history)
    out = _path(args, "checked_series.dat")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(" ".join(header) + " u_ok slopes_ok mass_ok c2rm_ok\n")
        idx = {n: k for k, n in enumerate(header)}
        m0 = data[0, idx["mass"]]
        c2rm0 = data[0, idx["c2rm_max"]]
        for row in data:
            flags = (float(row[idx["u_max"]] <= 1 + 1e-6),
                     float(min(row[idx["min_bs"]], row[idx["min_cs"]]) >= -1e-6),
                     float(abs(row[idx["mass"]] - m0) < 1e-3),
                     float(row[idx["c2rm_max"]] <= 1.1 * c2rm0))
            fh.write(" ".join("%.17g" % v for v in row) + " "
                     + " ".join("%g" % f for f in flags) + "\n")
    for k, v in iv.passes.items():
        man.outcome_line(k, v)
    for k, v in iv.extrema.items():
        man.outcome_line(f"extremum_{k}", v)
    return 0


# ----------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="boltflow",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="configuration file (key = value lines)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one configuration key")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reference", help="emit a reference metric profile")
    p.add_argument("--family", choices=["nut", "bolt", "fik", "cone"])
    p.add_argument("--n", type=float)
    sub.add_parser("spectrum", help="weighted Lichnerowicz spectrum over the shrinker")
    sub.add_parser("glue", help="cone glued into a rescaled Bolt background")
    sub.add_parser("perturb", help="glued slice plus eigenmode perturbation")
    p = sub.add_parser("simulate", help="run the reduced Ricci flow")
    p.add_argument("--profile", help="start from a profile snapshot")
    p.add_argument("--resume", help="resume from a checkpoint")
    p = sub.add_parser("surgery", help="excise and cap a collapsed profile")
    p.add_argument("--profile", required=False)
    p.add_argument("--r-bar", type=float, dest="r_bar")
    sub.add_parser("pipeline", help="glue, perturb, flow, surgery, relax")
    sub.add_parser("shoot", help="bisect the collapse/escape bracket")
    p = sub.add_parser("check", help="invariant suite over a recorded series")
    p.add_argument("--series")
    return ap


COMMANDS = {
    "reference": cmd_reference,
    "spectrum": cmd_spectrum,
    "glue": cmd_glue,
    "perturb": cmd_perturb,
    "simulate": cmd_simulate,
    "surgery": cmd_surgery,
    "pipeline": cmd_pipeline,
    "shoot": cmd_shoot,
    "check": cmd_check,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    _outdir(args)
    man = RunManifest(command=args.command, config=cfg)
    try:
        status = COMMANDS[args.command](args, cfg, man)
    except StageFailure as err:
        man.outcome_line("failed_stage", err.stage)
        man.outcome_line("error", str(err))
        man.write(_path(args, "manifest.txt"))
        print(err, file=sys.stderr)
        return 3
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    man.write(_path(args, "manifest.txt"))
    return status


if __name__ == "__main__":
    sys.exit(main())
