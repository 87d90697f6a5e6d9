"""Columnar text snapshots and binary checkpoints.

Profile snapshots are whitespace-delimited text with a header row and one
row per grid node, columns r, s, a, b, c plus optional curvature columns.
All floats print with round-trip precision (%.17g) so files diff cleanly
and reruns are bit-stable.  Checkpoints are a small binary container with
a magic header, a json table of contents, and raw little-endian float64
payloads; loading restores the flow state exactly.
"""
from __future__ import annotations

import io
import json
import struct

import numpy as np

from .flow import MONITOR_COLUMNS, FlowState
from .profile import Profile, Topology, curvature

FLOAT_FMT = "%.17g"
CHECKPOINT_MAGIC = b"U2RFCKPT"
CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _fmt_row(values):
    return " ".join(FLOAT_FMT % v for v in values)


def write_profile(path, p: Profile, with_curvature=False):
    cols = ["r", "s", "a", "b", "c"]
    arrays = [p.r, p.s, p.a, p.b, p.c]
    if with_curvature:
        fr = curvature(p)
        cols += ["K01", "K03", "K12", "K13", "W", "Ric00", "Ric11", "Ric33", "riem_norm"]
        arrays += [fr.K01, fr.K03, fr.K12, fr.K13, fr.W, fr.Ric00, fr.Ric11,
                   fr.Ric33, fr.riem_norm]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# topology = %s\n" % p.topology.value)
        fh.write(" ".join(cols) + "\n")
        for row in zip(*arrays):
            fh.write(_fmt_row(row) + "\n")


def read_profile(path) -> Profile:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# topology"):
            raise ValueError("profile snapshot missing the topology header")
        topo = Topology(first.split("=")[1].strip())
        header = fh.readline().split()
        data = np.loadtxt(fh)
    data = np.atleast_2d(data)
    col = {name: data[:, k] for k, name in enumerate(header)}
    s0 = float(col["s"][0])
    return Profile(topology=topo, r=col["r"], a=col["a"], b=col["b"], c=col["c"],
                   s0=s0 if abs(col["r"][0]) > 1e-14 else 0.0)


def write_background(path, bg):
    """Shrinker background snapshot: profile columns plus f, f_s."""
    p = bg.profile
    cols = ["r", "s", "a", "b", "c", "f", "f_s"]
    arrays = [p.r, p.s, p.a, p.b, p.c, bg.f, bg.f_s]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# topology = %s\n" % p.topology.value)
        fh.write("# c3 = %s  bolt_size = %s  lambda = %s\n"
                 % (FLOAT_FMT % bg.c3, FLOAT_FMT % bg.bolt_size, FLOAT_FMT % bg.lam))
        fh.write(" ".join(cols) + "\n")
        for row in zip(*arrays):
            fh.write(_fmt_row(row) + "\n")


def write_spectrum(path, result):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# lambda_star = %s  K = %d\n" % (FLOAT_FMT % result.lambda_star, result.K))
        fh.write("index eigenvalue residual\n")
        for j, (lam, res) in enumerate(zip(result.eigenvalues, result.residuals), 1):
            fh.write("%d %s %s\n" % (j, FLOAT_FMT % lam, FLOAT_FMT % res))


def write_eigentensor(path, T):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("s h00 h11 h33 h03\n")
        for row in zip(T.s, T.h00, T.h11, T.h33, T.h03):
            fh.write(_fmt_row(row) + "\n")


class SeriesWriter:
    """Streaming time-series writer with deterministic formatting."""

    def __init__(self, path, resume_rows=0):
        self.path = path
        mode = "a" if resume_rows else "w"
        self._fh = open(path, mode, encoding="utf-8")
        if not resume_rows:
            self._fh.write(" ".join(MONITOR_COLUMNS) + "\n")
        self.rows = resume_rows

    def __call__(self, rec):
        self._fh.write(_fmt_row(rec) + "\n")
        self._fh.flush()
        self.rows += 1

    def close(self):
        self._fh.close()


def write_series(path, history):
    w = SeriesWriter(path)
    for rec in history:
        w(rec)
    w.close()


def read_series(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        data = np.atleast_2d(np.loadtxt(fh))
    return header, data


# ----------------------------------------------------------------------
# checkpoints
# ----------------------------------------------------------------------

def save_checkpoint(path, state: FlowState, meta=None):
    arrays = {
        "r": state.profile.r,
        "a": state.profile.a,
        "b": state.profile.b,
        "c": state.profile.c,
        "c_tv": state.c_tv if state.c_tv is not None else np.zeros(0),
        "history": np.asarray(state.history, dtype=float).reshape(len(state.history), -1)
        if state.history else np.zeros((0, len(MONITOR_COLUMNS))),
        "scalars": np.array([state.t, state.dt, float(state.step_index),
                             state.T_hat if state.T_hat is not None else np.nan,
                             state.profile.s0]),
    }
    toc = {
        "version": CHECKPOINT_VERSION,
        "topology": state.profile.topology.value,
        "meta": meta or {},
        "arrays": {k: list(v.shape) for k, v in arrays.items()},
    }
    blob = json.dumps(toc, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for k in sorted(arrays):
            fh.write(np.ascontiguousarray(arrays[k], dtype="<f8").tobytes())


def load_checkpoint(path) -> FlowState:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError("not a flow checkpoint (bad magic)")
        (blen,) = struct.unpack("<I", fh.read(4))
        toc = json.loads(fh.read(blen).decode("utf-8"))
        if toc["version"] != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {toc['version']}")
        arrays = {}
        for k in sorted(toc["arrays"]):
            shape = tuple(toc["arrays"][k])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            arrays[k] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    t, dt, step_index, T_hat, s0 = arrays["scalars"]
    prof = Profile(topology=Topology(toc["topology"]), r=arrays["r"], a=arrays["a"],
                   b=arrays["b"], c=arrays["c"], s0=float(s0))
    history = [tuple(row) for row in arrays["history"]]
    c_tv = arrays["c_tv"] if arrays["c_tv"].size else None
    return FlowState(profile=prof, t=float(t), dt=float(dt),
                     step_index=int(step_index),
                     T_hat=None if np.isnan(T_hat) else float(T_hat),
                     history=history, c_tv=c_tv)
