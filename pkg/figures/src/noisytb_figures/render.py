"""Render the five figure layouts from result CSVs.

Each ``render_figN`` takes a validated ``FigureRecipe`` and writes one
image.  Styling is fixed and no timestamps enter the output, so the same
CSVs always produce byte-identical images.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import guides
from .resultcsv import ResultCSVError, ResultTable, read_result_csv

_SAVEFIG = dict(dpi=150, metadata={"Software": "noisytb-figures"})

_COLORS = plt.cm.viridis(np.linspace(0.0, 0.85, 8))


@dataclass
class FigureRecipe:
    """One figure: its id, validated input tables, and the output path."""

    figure_id: int
    tables: list
    out_path: str

    @classmethod
    def load(cls, figure_id: int, csv_paths, out_path: str) -> "FigureRecipe":
        if figure_id not in (1, 2, 3, 4, 5):
            raise ResultCSVError(f"unknown figure id {figure_id}")
        paths = list(csv_paths)
        if not paths:
            raise ResultCSVError("no input CSVs given")
        tables = [read_result_csv(p) for p in paths]
        return cls(figure_id=figure_id, tables=tables, out_path=out_path)


def _new_axes(figsize=(6.4, 4.4)):
    fig, ax = plt.subplots(figsize=figsize)
    ax.grid(True, which="both", alpha=0.25, linewidth=0.5)
    return fig, ax


def _positive(t: ResultTable, column: str):
    x = t.column("t")
    y = t.column(column)
    mask = (x > 0) & (y > 0)
    return x[mask], y[mask]


def render_fig1(recipe: FigureRecipe) -> str:
    """Mean squared position vs time with 4/gamma diffusion guides."""
    fig, ax = _new_axes()
    seen = []
    for i, table in enumerate(sorted(recipe.tables, key=lambda t: t.gamma)):
        x, y = _positive(table, "mean_x2")
        marker = "*" if table.unravelling == "wnp" else "x"
        ax.loglog(x, y, marker, markersize=4, color=_COLORS[i % len(_COLORS)],
                  label=table.label())
        if table.gamma not in seen:
            seen.append(table.gamma)
            ax.loglog(x, guides.diffusion_guide(x, table.gamma), "--",
                      linewidth=1.0, color=_COLORS[i % len(_COLORS)],
                      label=f"4t/gamma (gamma={table.gamma:g})")
    ax.set_xlabel("t")
    ax.set_ylabel("M[<x^2>]")
    ax.legend(fontsize=7)
    fig.savefig(recipe.out_path, **_SAVEFIG)
    plt.close(fig)
    return recipe.out_path


def render_fig2(recipe: FigureRecipe) -> str:
    """Squared centre-of-mass position with the sqrt(t) late-time guide."""
    fig, ax = _new_axes()
    for i, table in enumerate(recipe.tables):
        x, y = _positive(table, "mean_x_sq")
        ax.loglog(x, y, "-", linewidth=1.0, color=_COLORS[i % len(_COLORS)],
                  label=table.label())
        ax.loglog(x, guides.sqrt_time_guide(x, x[-1], y[-1]), "-",
                  linewidth=1.5, color="0.6", label="slope 1/2 guide")
    ax.set_xlabel("t")
    ax.set_ylabel("M[<x>^2]")
    ax.legend(fontsize=7)
    fig.savefig(recipe.out_path, **_SAVEFIG)
    plt.close(fig)
    return recipe.out_path


def render_fig3(recipe: FigureRecipe) -> str:
    """Rescaled packet width gamma^2 M[var] against gamma*t."""
    fig, ax = _new_axes()
    for i, table in enumerate(sorted(recipe.tables, key=lambda t: t.gamma)):
        x, y = _positive(table, "mean_var")
        g = table.gamma
        ax.loglog(x * g, y * g * g, "-", linewidth=1.0,
                  color=_COLORS[i % len(_COLORS)], label=table.label())
    ax.axhline(guides.jump_width_rescaled(), color="0.6", linewidth=1.5,
               label="jump width (4)")
    ax.set_xlabel("gamma t")
    ax.set_ylabel("gamma^2 M[var]")
    ax.legend(fontsize=7)
    fig.savefig(recipe.out_path, **_SAVEFIG)
    plt.close(fig)
    return recipe.out_path


def asymptotic_width(table: ResultTable, min_gamma_t: float = 40.0) -> float:
    """Time average of M[var] over gamma*t >= 40 (plotting-level reduction)."""
    gt = table.column("t") * table.gamma
    mask = gt >= min_gamma_t
    if not np.any(mask):
        raise ResultCSVError(
            f"{table.path}: series ends at gamma*t = {gt[-1]:.3g} < {min_gamma_t}"
        )
    return float(np.mean(table.column("mean_var")[mask]))


def render_fig4(recipe: FigureRecipe) -> str:
    """Asymptotic width vs gamma over the gamma^-2 and gamma^-1.76 guides."""
    tables = sorted(recipe.tables, key=lambda t: t.gamma)
    gammas = np.array([t.gamma for t in tables])
    values = np.array([asymptotic_width(t) for t in tables])
    fig, ax = _new_axes(figsize=(5.0, 4.2))
    grid = np.geomspace(gammas[0] / 1.3, gammas[-1] * 1.3, 50)
    ax.loglog(grid, guides.inverse_square_guide(grid), "-", color="0.3",
              linewidth=1.2, label="4 gamma^-2 (jump)")
    ax.loglog(grid, guides.width_scaling_guide(grid, gammas[0], values[0]),
              "--", color="0.3", linewidth=1.2, label="gamma^-1.76 guide")
    ax.loglog(gammas, values, "o", color="tab:red", label="asymptotic M[var]")
    ax.set_xlabel("gamma")
    ax.set_ylabel("time-averaged M[var], gamma t >= 40")
    ax.legend(fontsize=7)
    fig.savefig(recipe.out_path, **_SAVEFIG)
    plt.close(fig)
    return recipe.out_path


def render_fig5(recipe: FigureRecipe) -> str:
    """Width and participation number against gamma*t, wide-open in grey."""
    fig, (ax_var, ax_pn) = plt.subplots(1, 2, figsize=(9.6, 4.2))
    for ax in (ax_var, ax_pn):
        ax.grid(True, which="both", alpha=0.25, linewidth=0.5)
    color_idx = 0
    for table in sorted(recipe.tables, key=lambda t: t.gamma):
        g = table.gamma
        wide_open = table.unravelling == "qsd_wide_open"
        style = dict(color="0.4", linewidth=1.8) if wide_open else \
            dict(color=_COLORS[color_idx % len(_COLORS)], linewidth=1.0)
        if not wide_open:
            color_idx += 1
        x, y = _positive(table, "mean_var")
        ax_var.loglog(x * g, y, label=table.label(), **style)
        x, y = _positive(table, "mean_pn")
        ax_pn.semilogx(x * g, y, label=table.label(), **style)
    ax_var.set_xlabel("gamma t")
    ax_var.set_ylabel("M[var]")
    ax_pn.set_xlabel("gamma t")
    ax_pn.set_ylabel("M[P]")
    ax_pn.axhline(1.0, color="0.8", linewidth=0.8)
    ax_var.legend(fontsize=7)
    ax_pn.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(recipe.out_path, **_SAVEFIG)
    plt.close(fig)
    return recipe.out_path


RENDERERS = {1: render_fig1, 2: render_fig2, 3: render_fig3,
             4: render_fig4, 5: render_fig5}


def render(recipe: FigureRecipe) -> str:
    return RENDERERS[recipe.figure_id](recipe)
