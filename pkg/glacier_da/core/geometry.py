"""Bed geometry: a prograde bed interrupted by a reverse-slope sill."""

from __future__ import annotations

from typing import TypeVar

import numpy as np

from glacier_da.core.errors import NonMarineBedError
from glacier_da.core.models import ModelParams

ArrayOrFloat = TypeVar("ArrayOrFloat", float, np.ndarray)


def bed_elevation(x: ArrayOrFloat, p: ModelParams) -> ArrayOrFloat:
    """Bed elevation b(x), m, at distance ``x`` (m) from the divide.

    Piecewise linear and continuous: slope ``b_x`` up to the sill start,
    ``sill_slope`` across the sill, then ``b_x`` again beyond the sill end.

    Parameters
    ----------
    x : float or ndarray
        Position(s), m. Expected to be >= 0.
    p : ModelParams
        Geometry parameters.

    Returns
    -------
    float or ndarray
        Bed elevation, m (negative below sea level).
    """
    xs = np.asarray(x, dtype=float)
    x1, x2 = p.sill_start, p.sill_end
    b1 = p.b0 + p.b_x * x1
    b2 = b1 + p.sill_slope * (x2 - x1)

    b = np.where(
        xs <= x1,
        p.b0 + p.b_x * xs,
        np.where(xs <= x2, b1 + p.sill_slope * (xs - x1), b2 + p.b_x * (xs - x2)),
    )
    if np.ndim(x) == 0:
        return float(b)  # type: ignore[return-value]
    return b  # type: ignore[return-value]


def grounding_thickness(L: ArrayOrFloat, p: ModelParams) -> ArrayOrFloat:
    """Flotation thickness at the grounding line, h_g = -lambda * b(L).

    Raises
    ------
    NonMarineBedError
        If the bed at ``L`` is at or above sea level.
    """
    b = bed_elevation(L, p)
    if np.any(np.asarray(b) >= 0):
        raise NonMarineBedError(
            f"grounding line on non-marine bed: b(L) = {np.max(b):.6g} m >= 0 "
            f"at L = {np.min(L) / 1e3:.6g} km"
        )
    return -p.lam * b  # type: ignore[return-value]
