"""Deterministic PNG rendering for the three figure kinds.

Layouts follow the conventions of the simulation outputs: jump rasters sit
above the concurrence trace with the cavity row at the bottom of the raster,
envelope plots show the ensemble mean with its error band, and surfaces map
steady concurrence over trap size (x) and spontaneous rate (y).
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .recipe import REQUIRED_COLUMNS, FigureRecipe, RecipeError, read_csv

FIG_SIZE = (8.0, 5.0)
FIG_DPI = 120

_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "figure.figsize": FIG_SIZE,
    "figure.dpi": FIG_DPI,
    "savefig.dpi": FIG_DPI,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "figstudio",
}


def _floats(col: list[str], path: str, name: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in col])
    except ValueError as exc:
        raise RecipeError(f"{path}: column '{name}' is not numeric: {exc}")


def _channel_rows(channels: list[str]) -> list[str]:
    """Raster row order, bottom first: cavity rows, then the rest sorted."""
    uniq = sorted(set(channels))
    cavity = [c for c in uniq if c.startswith("cavity")]
    return sorted(cavity) + [c for c in uniq if not c.startswith("cavity")]


def _render_timeseries_jumps(recipe: FigureRecipe, fig) -> None:
    ts_path, jumps_path = recipe.inputs
    ts = read_csv(ts_path, REQUIRED_COLUMNS["timeseries+jumps"]["timeseries"])
    jp = read_csv(jumps_path, REQUIRED_COLUMNS["timeseries+jumps"]["jumps"])
    t = _floats(ts["t"], ts_path, "t")
    conc = _floats(ts["concurrence"], ts_path, "concurrence")
    jt = _floats(jp["t"], jumps_path, "t")
    channels = jp["channel"]

    ax_jumps, ax_conc = fig.subplots(
        2, 1, sharex=True, height_ratios=[1, 2])
    rows = _channel_rows(channels)
    for i, name in enumerate(rows):
        times = jt[[c == name for c in channels]]
        ax_jumps.eventplot(times, lineoffsets=i, linelengths=0.8,
                           linewidths=0.7, color=f"C{i}")
    ax_jumps.set_yticks(range(len(rows)), rows)
    ax_jumps.set_ylim(-0.6, max(len(rows) - 1, 0) + 0.6)
    ax_jumps.set_ylabel(recipe.labels.get("raster_y", "jump channel"))
    ax_jumps.grid(False)

    ax_conc.plot(t, conc, color="C0", linewidth=1.0)
    ax_conc.set_ylim(-0.05, 1.05)
    ax_conc.set_xlabel(recipe.labels.get("x", "t"))
    ax_conc.set_ylabel(recipe.labels.get("y", "concurrence"))
    if t.size:
        ax_conc.set_xlim(t[0], t[-1])


def _render_envelope(recipe: FigureRecipe, fig) -> None:
    path = recipe.inputs[0]
    cols = read_csv(path, REQUIRED_COLUMNS["envelope"]["ensemble"])
    t = _floats(cols["t"], path, "t")
    mean = _floats(cols["mean_concurrence"], path, "mean_concurrence")
    err = _floats(cols["stderr"], path, "stderr")
    com = _floats(cols["concurrence_of_mean"], path, "concurrence_of_mean")
    lo = _floats(cols["concurrence_min"], path, "concurrence_min")
    hi = _floats(cols["concurrence_max"], path, "concurrence_max")

    ax = fig.subplots()
    ax.fill_between(t, lo, hi, color="C0", alpha=0.15,
                    label="per-run range", linewidth=0)
    ax.fill_between(t, mean - err, mean + err, color="C0", alpha=0.4,
                    label="mean +- stderr", linewidth=0)
    ax.plot(t, mean, color="C0", linewidth=1.2, label="mean concurrence")
    ax.plot(t, com, color="C3", linewidth=1.0, linestyle="--",
            label="concurrence of mean state")
    ax.set_xlabel(recipe.labels.get("x", "t"))
    ax.set_ylabel(recipe.labels.get("y", "concurrence"))
    ax.set_ylim(-0.05, 1.05)
    if t.size:
        ax.set_xlim(t[0], t[-1])
    ax.legend(loc="lower right", framealpha=0.9)


def _render_surface(recipe: FigureRecipe, fig) -> None:
    path = recipe.inputs[0]
    cols = read_csv(path, REQUIRED_COLUMNS["surface"]["scan"])
    sigma = _floats(cols["trap_sigma"], path, "trap_sigma")
    gamma = _floats(cols["gamma_over_g"], path, "gamma_over_g")
    eta = _floats(cols["eta"], path, "eta")
    conc = _floats(cols["concurrence"], path, "concurrence")

    etas = sorted(set(eta.tolist()))
    axes = fig.subplots(1, len(etas), squeeze=False)[0]
    xs = np.array(sorted(set(sigma.tolist())))
    ys = np.array(sorted(set(gamma.tolist())))
    vmax = float(np.nanmax(conc)) if np.isfinite(conc).any() else 1.0
    mesh = None
    for ax, e in zip(axes, etas):
        grid = np.full((ys.size, xs.size), math.nan)
        sel = eta == e
        for s, g, c in zip(sigma[sel], gamma[sel], conc[sel]):
            grid[np.searchsorted(ys, g), np.searchsorted(xs, s)] = c
        mesh = ax.pcolormesh(xs, ys, np.ma.masked_invalid(grid),
                             shading="nearest", cmap="viridis",
                             vmin=0.0, vmax=max(vmax, 1e-12))
        ax.set_xlabel(recipe.labels.get("x", "trap size (fraction of "
                                             "wavelength)"))
        ax.set_ylabel(recipe.labels.get("y", "spontaneous rate / g"))
        if len(etas) > 1:
            ax.set_title(f"detector efficiency {e:g}")
        ax.grid(False)
    fig.colorbar(mesh, ax=list(axes),
                 label=recipe.labels.get("z", "concurrence"))


_RENDERERS = {
    "timeseries+jumps": _render_timeseries_jumps,
    "envelope": _render_envelope,
    "surface": _render_surface,
}


def render(recipe: FigureRecipe) -> str:
    """Render the recipe to its output path and return that path.

    Output is pixel-deterministic for identical inputs: fixed figure size,
    dpi and fonts, and the PNG is written without the Software metadata
    chunk (the only nondeterministic text matplotlib would embed).
    """
    with plt.rc_context(_RC):
        fig = plt.figure(figsize=FIG_SIZE, dpi=FIG_DPI)
        try:
            _RENDERERS[recipe.figure_kind](recipe, fig)
            if "title" in recipe.labels:
                fig.suptitle(recipe.labels["title"])
            fig.savefig(recipe.output, format="png",
                        metadata={"Software": None})
        finally:
            plt.close(fig)
    return recipe.output
