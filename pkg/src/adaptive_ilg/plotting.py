"""Log-log convergence and iteration-count figures written as SVG files."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp, so identical data gives identical files
plt.rcParams["svg.hashsalt"] = "adaptive-ilg"
plt.rcParams["svg.fonttype"] = "none"

COLORS = {"zarantonello": "tab:blue", "kacanov": "tab:orange", "newton": "tab:green"}


def _save(fig, path) -> None:
    tmp = f"{path}.tmp"
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    os.replace(tmp, path)


def _label(rec) -> str:
    return str(rec.config.scheme)


def _color(rec):
    return COLORS.get(rec.config.scheme.kind)


def convergence_plot(records, path, title=None) -> None:
    """Estimator (solid) and error (dashed) against #elements, with a |T|^(-1/2) reference."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    n_all = []
    for rec in records:
        n = rec.column("n_elements")
        n_all.append(n)
        ax.loglog(n, rec.column("estimator"), "o-", ms=3, color=_color(rec), label=f"{_label(rec)} estimator")
        ax.loglog(n, rec.column("h1_error"), "s--", ms=3, color=_color(rec), label=f"{_label(rec)} error")
    n_all = np.concatenate(n_all)
    ref_n = np.array([n_all.min(), n_all.max()], dtype=float)
    anchor = max(rec.column("estimator")[0] for rec in records)
    ax.loglog(ref_n, 2.0 * anchor * np.sqrt(ref_n[0] / ref_n), "k--", lw=1, label=r"$|\mathcal{T}|^{-1/2}$")
    ax.set_xlabel("number of elements")
    ax.set_ylabel("estimator / error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def iterations_plot(records, path, title=None) -> None:
    """Linearization steps per level against #elements."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for rec in records:
        ax.semilogx(rec.column("n_elements"), rec.column("iterations"), "o-", ms=3,
                    color=_color(rec), label=_label(rec))
    ax.set_xlabel("number of elements")
    ax.set_ylabel("linearization steps")
    ax.set_ylim(bottom=0)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
