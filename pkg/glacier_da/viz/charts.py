"""Static figures for twin runs, sensitivity families, sweeps and sea level."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.axes import Axes  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from glacier_da.core.experiments import SensitivityResult, SweepResult  # noqa: E402
from glacier_da.core.integrate import Trajectory  # noqa: E402
from glacier_da.core.models import H_DISPLAY_SCALE, L_DISPLAY_SCALE  # noqa: E402
from glacier_da.core.osse import RunRecord  # noqa: E402
from glacier_da.core.slr import SlrSeries  # noqa: E402
from glacier_da.viz.themes import SVG_METADATA, SVG_RC, THEME, apply_theme  # noqa: E402

_COMPONENTS = (("H", H_DISPLAY_SCALE, "H (km)"), ("L", L_DISPLAY_SCALE, "L (100 km)"))


def save_figure(fig: Figure, save_path: str | Path) -> Path:
    """Save ``fig``; SVG output carries no date and a fixed id salt."""
    path = Path(save_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".svg":
        with plt.rc_context(SVG_RC):
            fig.savefig(str(path), metadata=SVG_METADATA)
    else:
        fig.savefig(str(path), dpi=150, bbox_inches="tight")
    return path


def _finish(fig: Figure, save_path: str | Path | None) -> Figure:
    fig.tight_layout()
    if save_path:
        save_figure(fig, save_path)
    return fig


def plot_trajectory(
    trajectory: Trajectory,
    *,
    title: str = "Truth run",
    save_path: str | Path | None = None,
) -> Figure:
    """H and L of a single model run in display units."""
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=THEME["panel_figsize"])
    for ax, (name, scale, label) in zip(axes, _COMPONENTS):
        ax.plot(trajectory.t, getattr(trajectory, name) / scale, color=THEME["colors"]["truth"])
        ax.set_ylabel(label, fontsize=THEME["font_size"]["label"])
        apply_theme(ax)
    axes[0].set_title(title, fontsize=THEME["font_size"]["title"])
    axes[-1].set_xlabel("Year", fontsize=THEME["font_size"]["label"])
    return _finish(fig, save_path)


def plot_twin_run(
    record: RunRecord,
    *,
    title: str = "Twin experiment",
    save_path: str | Path | None = None,
) -> Figure:
    """Truth, background, analysis mean and observations for H and L.

    Parameters
    ----------
    record : RunRecord
        Output of a twin run.
    title : str
        Figure title.
    save_path : str, Path, or None
        If provided, saves the figure there (SVG or PNG by suffix).

    Returns
    -------
    Figure
    """
    colors = THEME["colors"]
    frame = record.frame
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=THEME["panel_figsize"])
    for ax, (name, scale, label) in zip(axes, _COMPONENTS):
        t = frame["t"]
        ax.plot(t, frame[f"{name}_truth"] / scale, color=colors["truth"], lw=1.5, label="truth")
        ax.plot(
            t,
            frame[f"{name}_background"] / scale,
            color=colors["background"],
            lw=1.2,
            ls="--",
            label="background",
        )
        ax.plot(
            t,
            frame[f"{name}_analysis"] / scale,
            color=colors["analysis"],
            lw=1.2,
            label="analysis mean",
        )
        obs = frame.loc[frame["analysed"]]
        if not obs.empty:
            ax.scatter(
                obs["t"],
                obs[f"{name}_obs"] / scale,
                s=6,
                color=colors["observation"],
                label="observations",
                zorder=3,
            )
        ax.set_ylabel(label, fontsize=THEME["font_size"]["label"])
        apply_theme(ax)
    axes[0].legend(fontsize=THEME["font_size"]["legend"], frameon=False)
    axes[0].set_title(title, fontsize=THEME["font_size"]["title"])
    axes[-1].set_xlabel("Year", fontsize=THEME["font_size"]["label"])
    return _finish(fig, save_path)


def plot_sensitivity(
    result: SensitivityResult,
    *,
    save_path: str | Path | None = None,
) -> Figure:
    """Every trajectory of a sensitivity family, coloured by factor."""
    frame = result.frame
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=THEME["panel_figsize"])
    factors = sorted(frame["factor"].unique())
    cmap = plt.get_cmap("viridis")
    for ax, (name, scale, label) in zip(axes, _COMPONENTS):
        for k, factor in enumerate(factors):
            sample = frame.loc[frame["factor"] == factor]
            ax.plot(
                sample["t"],
                sample[name] / scale,
                color=cmap(k / max(len(factors) - 1, 1)),
                lw=1.0,
                label=f"x{factor:.3f}",
            )
        ax.set_ylabel(label, fontsize=THEME["font_size"]["label"])
        apply_theme(ax)
    params = ", ".join(result.category.params)
    axes[0].set_title(
        f"Sensitivity: {result.category.name} ({params})", fontsize=THEME["font_size"]["title"]
    )
    axes[0].legend(fontsize=THEME["font_size"]["legend"], frameon=False, ncol=3)
    axes[-1].set_xlabel("Year", fontsize=THEME["font_size"]["label"])
    return _finish(fig, save_path)


def plot_sweep(
    results: list[SweepResult],
    *,
    xlabel: str = "Ensemble size",
    ax: Axes | None = None,
    save_path: str | Path | None = None,
) -> Figure:
    """Median MSD with interquartile bars against the sweep axis (log scale)."""
    colors = THEME["colors"]
    if ax is None:
        fig, ax = plt.subplots(figsize=THEME["figsize"])
    else:
        fig = ax.get_figure()  # type: ignore[assignment]
    assert ax is not None and fig is not None

    x = np.array([r.axis for r in results])
    for comp in ("H", "L"):
        y = np.array([getattr(r, f"msd_{comp}") for r in results])
        iqr = np.array([getattr(r, f"msd_{comp}_iqr") for r in results])
        ax.errorbar(
            x,
            y,
            yerr=0.5 * iqr,
            marker="o",
            ms=3,
            lw=1.0,
            capsize=2,
            color=colors[f"msd_{comp}"],
            label=f"MSD {comp}",
        )
    if len(results) and all(r.msd_H > 0 and r.msd_L > 0 for r in results):
        ax.set_yscale("log")
    ax.set_xlabel(xlabel, fontsize=THEME["font_size"]["label"])
    ax.set_ylabel("Mean square difference", fontsize=THEME["font_size"]["label"])
    ax.legend(fontsize=THEME["font_size"]["legend"], frameon=False)
    apply_theme(ax)
    return _finish(fig, save_path)


def plot_slr(
    series: SlrSeries,
    *,
    save_path: str | Path | None = None,
) -> Figure:
    """Cumulative grounding-zone volume and its sea-level equivalent."""
    colors = THEME["colors"]
    fig, ax = plt.subplots(figsize=THEME["figsize"])
    frame = series.frame
    ax.plot(frame["t"], frame["Vcum_km3"], color=colors["volume"], lw=1.5)
    ax.set_xlabel("Year", fontsize=THEME["font_size"]["label"])
    ax.set_ylabel("Cumulative volume (km^3)", fontsize=THEME["font_size"]["label"])
    apply_theme(ax)

    ax2 = ax.twinx()
    ax2.plot(frame["t"], frame["slr_mm"], color=colors["sea_level"], lw=1.0, ls="--")
    ax2.set_ylabel("Sea level (mm)", fontsize=THEME["font_size"]["label"])
    ax2.tick_params(labelsize=THEME["font_size"]["tick"])
    ax.set_title(
        f"Grounding-zone loss, width {series.width_km:g} km",
        fontsize=THEME["font_size"]["title"],
    )
    return _finish(fig, save_path)
