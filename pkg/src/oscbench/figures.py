"""Figure rendering for sweep and decay reports.

Figures land next to the delimited output as PNG files; everything runs
on the Agg backend so reports render headless.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_sweep_figures(report, out_dir) -> list:
    out = Path(out_dir)
    paths = []
    n = report.nvars
    cells = report.cells
    taus = np.array([c[0] for c in cells])
    mags = np.array([math.hypot(c[n + 1], c[n + 2]) for c in cells])
    ratios = mags * np.maximum(1.0, np.abs(taus))
    branches = [c[n + 4] for c in cells]

    # ratio versus tau, per-branch scatter with the per-tau envelope
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    colors = {"LargeA": "tab:blue", "NoCritical": "tab:green",
              "Critical": "tab:red"}
    floor = max(report.c_hat * 1e-16, 1e-300)
    for name, color in colors.items():
        sel = np.array([b == name for b in branches])
        if sel.any():
            ax.loglog(taus[sel], np.maximum(ratios[sel], floor), ".",
                      ms=4, alpha=0.5, color=color, label=name)
    uniq = np.unique(taus)
    env = [ratios[taus == t].max() for t in uniq]
    ax.loglog(uniq, env, "k-", lw=1.5, label="per-tau max")
    ax.axhline(report.c_hat, color="k", ls="--", lw=1,
               label=f"c_hat = {report.c_hat:.3e}")
    ax.set_xlabel("tau")
    ax.set_ylabel("|I| * max(1, tau)")
    ax.set_title(f"{report.name}: uniform-constant sweep")
    ax.legend(fontsize=8, loc="lower left")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    p1 = out / "fig_ratio_vs_tau.png"
    fig.savefig(p1, dpi=150)
    plt.close(fig)
    paths.append(p1)

    # ratio heatmap over the rectangular t-grid at the largest tau
    tau_top = float(np.max(taus))
    i_axis, j_axis = _grid_axes(report)
    sel = [k for k, c in enumerate(cells)
           if c[0] == tau_top and _on_grid(c, n, i_axis, j_axis)]
    if sel:
        t1 = np.array([cells[k][i_axis] for k in sel])
        t2 = np.array([cells[k][j_axis] for k in sel])
        rr = ratios[sel]
        n1, n2 = np.unique(t1).size, np.unique(t2).size
        if n1 * n2 == len(sel):
            shape = (n1, n2)
            order = np.lexsort((t2, t1))
            grid = rr[order].reshape(shape)
            fig, ax = plt.subplots(figsize=(5.2, 4.4))
            pc = ax.pcolormesh(np.unique(t1), np.unique(t2), np.log10(
                np.maximum(grid.T, floor)), shading="nearest", cmap="viridis")
            fig.colorbar(pc, ax=ax, label="log10 ratio")
            ax.set_xlabel(f"t{i_axis}")
            ax.set_ylabel(f"t{j_axis}")
            ax.set_title(f"ratio over the t-grid at tau = {tau_top:g}")
            fig.tight_layout()
            p2 = out / "fig_ratio_grid.png"
            fig.savefig(p2, dpi=150)
            plt.close(fig)
            paths.append(p2)
    return paths


def _grid_axes(report) -> tuple:
    # the two axes whose t values vary over the rectangular grid
    n = report.nvars
    varying = []
    for axis in range(1, n + 1):
        vals = {c[axis] for c in report.cells}
        if len(vals) > 1:
            varying.append(axis)
    if len(varying) >= 2:
        return varying[0], varying[1]
    return 1, 2


def _on_grid(cell, n, i_axis, j_axis) -> bool:
    return all(cell[a] == 0.0 for a in range(1, n + 1) if a not in (i_axis, j_axis))


def render_fresnel_figure(report, out_dir) -> Path:
    out = Path(out_dir)
    taus = np.asarray(report.tau_values)
    sups = np.asarray(report.sup_values)
    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    ax.loglog(taus, sups, "o-", label="sup |running integral|")
    ref = sups[0] * (taus / taus[0]) ** -0.5
    ax.loglog(taus, ref, "k--", lw=1, label="slope -1/2 reference")
    ax.set_xlabel("tau")
    ax.set_ylabel("sup over endpoints")
    ax.set_title(f"Gaussian-phase partial integrals, slope {report.slope:.3f}")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = out / "fig_fresnel_decay.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
