"""Figure rendering for the report path.

Every CLI command that emits delimited output also renders the matching
figures next to it.  Rendering is headless (Agg) and deterministic: no
timestamps in the PNG metadata.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=130, metadata=_PNG_META)
    plt.close(fig)


def plot_profile(path, p, title=None):
    s = p.s
    fig, ax = plt.subplots(figsize=(6.2, 4.2))
    ax.plot(s, p.b, label="b")
    ax.plot(s, p.c, label="c")
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(p.b > 0, p.c / p.b, 0.0)
    ax2 = ax.twinx()
    ax2.plot(s, u, color="tab:red", lw=0.9, label="u = c/b")
    ax2.set_ylabel("u")
    ax2.set_ylim(0, 1.05)
    ax.set_xlabel("arclength s")
    ax.set_ylabel("warpings")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper left")
    fig.tight_layout()
    _save(fig, path)


def plot_curvature(path, p, frame, title=None):
    s = p.s
    fig, ax = plt.subplots(figsize=(6.2, 4.2))
    for name in ("K01", "K03", "K12", "K13"):
        ax.plot(s, getattr(frame, name), label=name, lw=0.9)
    ax.plot(s, frame.riem_norm, label="|Rm|", color="k", lw=1.4)
    ax.set_xlabel("arclength s")
    ax.set_ylabel("frame curvature")
    ax.set_xscale("symlog", linthresh=1.0)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_series(path, header, data, title=None):
    cols = {name: data[:, k] for k, name in enumerate(header)}
    t = cols["t"]
    fig, axes = plt.subplots(2, 2, figsize=(9.0, 6.4), sharex=True)
    ax = axes[0, 0]
    ax.semilogy(t, cols["max_rm"])
    ax.set_ylabel("max |Rm|")
    ax = axes[0, 1]
    ax.plot(t, cols["bolt_size"])
    ax.set_ylabel("bolt size")
    ax = axes[1, 0]
    ax.plot(t, cols["u_max"], label="u_max")
    ax.plot(t, cols["min_bs"], label="min b_s")
    ax.plot(t, cols["min_cs"], label="min c_s")
    ax.legend(fontsize=8)
    ax.set_xlabel("t")
    ax = axes[1, 1]
    ax.plot(t, cols["c2rm_max"], label="max c^2|Rm|")
    finite = np.isfinite(cols["type_one_ratio"])
    if finite.any():
        ax.plot(t[finite], cols["type_one_ratio"][finite], label="(T-t) max |Rm|")
    if np.isfinite(cols["nut_residual"]).any():
        ax.plot(t, cols["nut_residual"], label="nut residual")
    ax.legend(fontsize=8)
    ax.set_xlabel("t")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)


def plot_spectrum(path, result, title=None):
    fig, ax = plt.subplots(figsize=(5.4, 3.8))
    j = np.arange(1, result.eigenvalues.size + 1)
    ax.plot(j, result.eigenvalues, "o-")
    ax.axhline(0.0, color="k", lw=0.6)
    ax.axhline(result.lambda_star, color="tab:red", lw=0.8, ls="--",
               label="lambda_*")
    ax.set_xlabel("mode index")
    ax.set_ylabel("eigenvalue")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_rescaled_u(path, s_hat, u_hat, u_model, title=None):
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    ax.plot(s_hat, u_hat, label="rescaled flow u")
    ax.plot(s_hat, u_model, "--", label="shrinker u")
    ax.set_xlabel("rescaled arclength")
    ax.set_ylabel("u")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
