"""Consistent visual theme for glacier-da figures."""

from __future__ import annotations

from typing import Any

from matplotlib.axes import Axes

# Visual theme configuration for all glacier-da figures.
# - "colors": named palette for run series (truth, background, analysis, ...)
# - "figsize": default (width, height) in inches for single-panel figures
# - "panel_figsize": (width, height) for the stacked H/L figures
# - "font_size": font sizes by role (title, axis label, legend, tick)
THEME: dict[str, Any] = {
    "colors": {
        "truth": "#212121",
        "background": "#FF9800",
        "analysis": "#2196F3",
        "forecast": "#90CAF9",
        "observation": "#F44336",
        "family": "#607D8B",
        "msd_H": "#1565C0",
        "msd_L": "#4CAF50",
        "volume": "#9C27B0",
        "sea_level": "#009688",
    },
    "figsize": (8, 5),
    "panel_figsize": (9, 7),
    "font_size": {
        "title": 14,
        "label": 11,
        "legend": 9,
        "tick": 9,
    },
}

# SVG renders: fixed id salt, no creation date.
SVG_RC: dict[str, Any] = {"svg.hashsalt": "glacier-da"}
SVG_METADATA: dict[str, Any] = {"Date": None}


def apply_theme(ax: Axes) -> None:
    """Apply consistent styling to a matplotlib axes."""
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.tick_params(labelsize=THEME["font_size"]["tick"])
