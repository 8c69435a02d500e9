"""Grounding-zone volume loss and sea-level equivalent.

Volume crosses the grounding zone at ``dV/dt = W (Q - Q_g)``; the rate is
summed over the model time steps from zero and converted to millimetres of
sea level with 394.67 km^3 of ice per mm.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import pandas as pd

from glacier_da.core.errors import ValidationError
from glacier_da.core.integrate import Trajectory
from glacier_da.core.models import KM
from glacier_da.core.osse import RunRecord

log = logging.getLogger(__name__)

KM3_ICE_PER_MM = 394.67
M3_PER_KM3 = 1.0e9
GREENLAND_GLACIER_COUNT = 733
DEFAULT_WIDTHS_KM = (5.0, 50.0, 100.0)
REGIONAL_CAVEAT = (
    "Regional totals multiply one glacier's contribution by the glacier count; "
    "we crudely assume the width of all the glaciers are the same."
)

SLR_COLUMNS = ["t", "Q", "Qg", "dV_km3", "Vcum_km3", "slr_mm"]

Diagnostics = Union[Trajectory, RunRecord]


def volume_rate(Q: np.ndarray, Q_g: np.ndarray, W: float) -> np.ndarray:
    """Volume flux across the grounding zone, km^3/yr.

    Parameters
    ----------
    Q, Q_g : float or ndarray
        Interior and grounding-line fluxes, m^2/yr.
    W : float
        Glacier width, km.
    """
    if not W > 0:
        raise ValidationError(f"width must be > 0, got {W}")
    return W * KM * (np.asarray(Q) - np.asarray(Q_g)) / M3_PER_KM3


def to_sea_level_mm(V_km3: np.ndarray) -> np.ndarray:
    """Sea-level equivalent of an ice volume, mm."""
    return np.asarray(V_km3) / KM3_ICE_PER_MM


@dataclass
class SlrSeries:
    """Cumulative grounding-zone volume and sea level for one width.

    ``frame`` follows the ``slr`` CSV schema; ``slr_mm`` already includes
    ``glacier_count``.
    """

    frame: pd.DataFrame
    width_km: float
    glacier_count: int = 1
    rule: str = "rectangle"

    @property
    def t(self) -> np.ndarray:
        return self.frame["t"].to_numpy()

    def final_km3(self) -> float:
        return float(self.frame["Vcum_km3"].iloc[-1])

    def final_mm(self) -> float:
        return float(self.frame["slr_mm"].iloc[-1])

    def mm_at(self, t: float) -> float:
        return float(np.interp(t, self.t, self.frame["slr_mm"].to_numpy()))


def _flux_series(diagnostics: Diagnostics) -> Trajectory:
    if isinstance(diagnostics, RunRecord):
        return diagnostics.diagnostics()
    return diagnostics


def accumulate(
    diagnostics: Diagnostics,
    W: float,
    glacier_count: int = 1,
    *,
    rule: str = "rectangle",
) -> SlrSeries:
    """Sum the volume rate over the diagnostics' time steps, starting from zero.

    Parameters
    ----------
    diagnostics : Trajectory or RunRecord
        Time-ordered flux diagnostics; a run record contributes its
        analysis-mean trajectory.
    W : float
        Width, km.
    glacier_count : int
        Multiplier applied to the sea-level column.
    rule : {"rectangle", "trapezoid"}
        Left-rectangle (rate at the start of each step) or trapezoid.
    """
    if rule not in ("rectangle", "trapezoid"):
        raise ValidationError(f"rule must be 'rectangle' or 'trapezoid', got '{rule}'")
    if glacier_count < 1:
        raise ValidationError(f"glacier_count must be >= 1, got {glacier_count}")
    traj = _flux_series(diagnostics)
    t = np.asarray(traj.t, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValidationError("diagnostics must be strictly time-ordered")

    rate = volume_rate(traj.Q, traj.Q_g, W)
    steps = np.diff(t)
    if rule == "rectangle":
        step_volume = rate[:-1] * steps
    else:
        step_volume = 0.5 * (rate[:-1] + rate[1:]) * steps
    dV = np.concatenate(([0.0], step_volume))
    V_cum = np.cumsum(dV)
    frame = pd.DataFrame(
        {
            "t": t,
            "Q": np.asarray(traj.Q, dtype=float),
            "Qg": np.asarray(traj.Q_g, dtype=float),
            "dV_km3": dV,
            "Vcum_km3": V_cum,
            "slr_mm": to_sea_level_mm(V_cum) * glacier_count,
        }
    )
    return SlrSeries(frame=frame, width_km=float(W), glacier_count=glacier_count, rule=rule)


@dataclass(frozen=True)
class RegionalEstimate:
    """One glacier's final sea level scaled to a region."""

    mm: float
    per_glacier_mm: float
    glacier_count: int
    width_km: float
    caveat: str = REGIONAL_CAVEAT


def regional_estimate(
    series: SlrSeries, glacier_count: int = GREENLAND_GLACIER_COUNT
) -> RegionalEstimate:
    """Final single-glacier sea level times ``glacier_count``."""
    if glacier_count < 1:
        raise ValidationError(f"glacier_count must be >= 1, got {glacier_count}")
    per_glacier = float(to_sea_level_mm(series.final_km3()))
    return RegionalEstimate(
        mm=per_glacier * glacier_count,
        per_glacier_mm=per_glacier,
        glacier_count=glacier_count,
        width_km=series.width_km,
    )


def width_study(
    diagnostics: Diagnostics,
    widths: Sequence[float] = DEFAULT_WIDTHS_KM,
    *,
    rule: str = "rectangle",
) -> dict[float, SlrSeries]:
    """Cumulative sea level for each width over the same flux diagnostics."""
    traj = _flux_series(diagnostics)
    out = {float(w): accumulate(traj, float(w), rule=rule) for w in widths}
    for w, series in out.items():
        log.info("width %s km: V=%.6g km^3, slr=%.6g mm", w, series.final_km3(), series.final_mm())
    return out


def width_summary(study: dict[float, SlrSeries]) -> pd.DataFrame:
    """Final volume and sea level (signed and magnitude) per width."""
    rows = [
        {
            "width_km": w,
            "Vcum_km3": s.final_km3(),
            "slr_mm": s.final_mm(),
            "slr_mm_magnitude": abs(s.final_mm()),
        }
        for w, s in sorted(study.items())
    ]
    return pd.DataFrame(rows, columns=["width_km", "Vcum_km3", "slr_mm", "slr_mm_magnitude"])
