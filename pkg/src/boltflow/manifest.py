"""Flat key = value configuration with a strict schema, and run manifests.

Every run resolves its configuration against the schema below, rejects
unknown keys outright, and echoes the resolved values (plus grid, code
version, tolerances and outcome summary) into a manifest file next to the
outputs.  Floating-point values are printed with round-trip precision so a
manifest pins a rerun bit for bit.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

CONFIG_SCHEMA = {
    # flow domain
    "grid.s_max": (float, 58.0, "outer radius of the flow domain"),
    "grid.h_min": (float, 0.002, "spacing in the fine axis region"),
    "grid.h_max": (float, 0.05, "spacing in the outer region"),
    "grid.r_fine": (float, 0.9, "end of the uniformly fine region"),
    "grid.r_coarse": (float, 5.0, "start of the uniformly coarse region"),
    # shrinker background
    "fik.s_far": (float, 1000.0, "far radius of the collocation solve"),
    "fik.core_h": (float, 0.005, "spacing of the dense core grid"),
    "fik.core_max": (float, 24.0, "extent of the dense core grid"),
    "fik.tail_nodes": (int, 400, "nodes on the geometric tail"),
    # spectral problem
    "spectrum.nodes": (int, 900, "cell-centred nodes of the operator grid"),
    "spectrum.s_max": (float, 14.0, "truncation radius of the operator"),
    "spectrum.count": (int, 8, "number of top eigenpairs"),
    # glued data
    "glue.gamma0": (float, 0.7, "perturbation cutoff scale"),
    "glue.t0": (float, 0.9, "initial self-similar time"),
    "glue.Gamma0": (float, 8.0, "glueing scale; R1 = sqrt(Gamma0/2)"),
    "glue.p_bar": (float, 0.35, "perturbation coefficient cap"),
    "glue.alpha": (float, 0.0, "Bolt rescaling (0 = smallest admissible)"),
    "glue.bolt_n": (float, 1.0, "Taub-Bolt family parameter"),
    # flow control
    "flow.cfl": (float, 0.2, "parabolic safety factor"),
    "flow.monitor_every": (int, 400, "steps between monitor rows"),
    "flow.t_end": (float, 2.0, "latest flow time"),
    "flow.threshold_factor": (float, 1000.0, "blow-up threshold over initial max |Rm|"),
    "flow.theta": (float, 0.01, "collapsed-fiber fraction in the blow-up set; "
                   "small because the glued tail plateau carries the Bolt rescaling"),
    "flow.s_inner": (float, 1.2, "inner window of the nut residual"),
    "flow.rescale_inner": (float, 6.0, "inner window of the rescaled comparison"),
    "flow.mu": (float, 1.0, "weight of b_s^2 in the interior traces"),
    "flow.nu": (float, 1.0, "weight of c_s^2 in the interior traces"),
    # perturbation / pipeline
    "perturb.p1": (float, -0.06, "coefficient along the leading mode"),
    "surgery.r_bar_factor": (float, 2.0, "R_bar over the measured blow-up radius"),
    "surgery.r_bar_min": (float, 0.5, "floor for the excision radius"),
    "post.t_end": (float, 2.5, "duration of the post-surgery flow"),
    "post.monitor_every": (int, 500, "steps between monitor rows after surgery"),
    "post.nut_tol": (float, 1e-2, "target for the nut residual"),
    # box bisection
    "shoot.p_lo": (float, -0.08, "lower endpoint coefficient"),
    "shoot.p_hi": (float, 0.3, "upper endpoint coefficient"),
    "shoot.iters": (int, 5, "bisection iterations"),
    "shoot.window": (float, 1.3, "escape horizon in units of 1 - t0"),
    "box.mu_u": (float, 0.5, "unstable projection bound"),
    "box.mu_s": (float, 0.5, "stable projection bound"),
    "box.eps0": (float, 0.5, "C0 frame bound"),
    "box.eps1": (float, 0.5, "C1 frame bound"),
    "box.eps2": (float, 0.5, "C2 frame bound"),
    "box.variant": (str, "fixed_t0", "threshold variant: fixed_t0 | time_dependent"),
    # reference families
    "reference.family": (str, "nut", "nut | bolt | fik | cone"),
    "reference.n": (float, 1.0, "Taub family parameter"),
    "reference.s_max": (float, 150.0, "extent of reference profiles"),
    "reference.nodes": (int, 4001, "nodes of reference profiles"),
}


class ConfigError(ValueError):
    pass


def _parse_value(kind, raw, key):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError
        return kind(raw)
    except ValueError:
        raise ConfigError(f"value {raw!r} for {key} is not a valid {kind.__name__}")


def default_config():
    return {k: v[1] for k, v in CONFIG_SCHEMA.items()}


def _reject_unknown(key):
    known = "\n  ".join(f"{k} ({v[0].__name__}): {v[2]}" for k, v in CONFIG_SCHEMA.items())
    raise ConfigError(f"unknown configuration key {key!r}; valid keys:\n  {known}")


def parse_config_text(text):
    cfg = default_config()
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in CONFIG_SCHEMA:
            _reject_unknown(key)
        cfg[key] = _parse_value(CONFIG_SCHEMA[key][0], raw, key)
    return cfg


def load_config(path=None, overrides=()):
    cfg = default_config()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            cfg.update(parse_config_text(fh.read()))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        if key not in CONFIG_SCHEMA:
            _reject_unknown(key)
        cfg[key] = _parse_value(CONFIG_SCHEMA[key][0], raw, key)
    return cfg


def format_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class RunManifest:
    command: str
    config: dict
    extras: dict = field(default_factory=dict)
    outcome: dict = field(default_factory=dict)
    started: float = field(default_factory=time.time)

    def note(self, key, value):
        self.extras[key] = value

    def outcome_line(self, key, value):
        self.outcome[key] = value

    def write(self, path):
        from . import __version__
        lines = [f"command = {self.command}", f"code_version = {__version__}"]
        for k in sorted(self.config):
            lines.append(f"{k} = {format_value(self.config[k])}")
        for k in sorted(self.extras):
            lines.append(f"resolved.{k} = {format_value(self.extras[k])}")
        for k in sorted(self.outcome):
            lines.append(f"outcome.{k} = {format_value(self.outcome[k])}")
        lines.append(f"wall_clock_s = {time.time() - self.started:.3f}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
