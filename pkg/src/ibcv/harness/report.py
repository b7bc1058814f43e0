"""PNG figures of force coefficients and momentum next to the CSV output."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .run import load_forces, load_momentum, select  # noqa: E402

STYLES = {
    "cv": dict(color="k", ls="-", lw=1.2, label="CV (modified)"),
    "noca": dict(color="tab:red", ls="--", lw=1.0, label="CV (Noca)"),
    "lm": dict(color="tab:blue", ls=":", lw=1.6, label="LM"),
    "stokes_cv": dict(color="k", marker="o", ls="", label="CV"),
    "stokes_lm": dict(color="tab:blue", marker="x", ls="", label="LM"),
}


def _safe(name):
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name) or "all"


def force_figure(table, body, cv, path):
    fig, axes = plt.subplots(3, 1, figsize=(6.5, 6.5), sharex=True, constrained_layout=True)
    for method, style in STYLES.items():
        sub = select(table, body, method, cv)
        if not len(sub["t"]):
            continue
        for ax, col in zip(axes, ("C_D", "C_L", "C_T")):
            ax.plot(sub["t"], sub[col], **style)
    for ax, col in zip(axes, ("C_D", "C_L", "C_T")):
        ax.set_ylabel(col)
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("t")
    axes[0].set_title(f"{body} / {cv}" if cv else body)
    axes[0].legend(fontsize=8, frameon=False)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def momentum_figure(mom, path):
    fig, axes = plt.subplots(2, 1, figsize=(6.5, 4.5), sharex=True, constrained_layout=True)
    names = [c for c in dict.fromkeys(mom["cv"])]
    first = mom["cv"] == names[0] if names else np.ones(len(mom["t"]), dtype=bool)
    t = mom["t"][first]
    axes[0].plot(t, mom["Px"][first], label="P_x")
    axes[0].plot(t, mom["Py"][first], label="P_y")
    axes[0].set_ylabel("domain momentum")
    axes[0].legend(fontsize=8, frameon=False)
    axes[1].plot(t, mom["Lz"][first], color="tab:green")
    axes[1].set_ylabel("angular momentum")
    axes[1].set_xlabel("t")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_report(result):
    """Write figures for ``result`` into ``<out_dir>/figures``; returns paths."""
    d = os.path.join(result.out_dir, "figures")
    os.makedirs(d, exist_ok=True)
    table = load_forces(result.forces_csv)
    paths = []
    pairs = sorted(set(zip(table["body"], table["cv"])))
    for body, cv in pairs:
        sub = select(table, body, None, cv)
        if not len(sub["t"]):
            continue
        paths.append(force_figure(table, body, cv, os.path.join(d, f"forces_{_safe(body)}_{_safe(cv)}.png")))
    if result.momentum_csv and os.path.exists(result.momentum_csv):
        mom = load_momentum(result.momentum_csv)
        if len(mom["t"]):
            paths.append(momentum_figure(mom, os.path.join(d, "momentum.png")))
    return paths
