"""Fixed-step RK4 time stepping for the two-stage model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd

from glacier_da.core.dynamics import Rates, rates
from glacier_da.core.errors import StateBlowupError, ValidationError
from glacier_da.core.models import GlacierState, ModelParams, to_display

# A propagator advances an array of states (shape (..., d)) from year t by dt.
Propagator = Callable[[np.ndarray, float, float], np.ndarray]

_GRID_DECIMALS = 10


def time_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    """Model output times ``t0, t0 + dt, ...`` ending exactly on ``t1``.

    A final partial step is added when ``dt`` does not divide the span.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    if t1 < t0:
        raise ValidationError(f"window must satisfy t0 <= t1, got {t0}, {t1}")
    span = t1 - t0
    n = int(math.floor(span / dt + 1e-9))
    times = t0 + dt * np.arange(n + 1, dtype=float)
    if span - n * dt > 1e-9 * max(dt, 1.0):
        times = np.append(times, t1)
    else:
        times[-1] = t1
    return np.round(times, _GRID_DECIMALS)


def grid_index(times: np.ndarray, t: float, dt: float) -> int:
    """Index of ``t`` on a model grid, or ``ValidationError`` if it is off-grid."""
    i = int(np.searchsorted(times, t - 1e-6 * dt))
    if i >= len(times) or abs(times[i] - t) > 1e-6 * dt:
        raise ValidationError(f"time {t} is not on the model grid (dt={dt})")
    return i


def _as_rates(t: float, x: np.ndarray, p: ModelParams) -> Rates:
    return rates(t, x[..., 0], x[..., 1], p)


def _slope(r: Rates) -> np.ndarray:
    return np.stack([r.dH_dt, r.dL_dt], axis=-1)


def _rk4(
    t: float, x: np.ndarray, dt: float, p: ModelParams, k1: np.ndarray | None = None
) -> np.ndarray:
    if k1 is None:
        k1 = _slope(_as_rates(t, x, p))
    k2 = _slope(_as_rates(t + 0.5 * dt, x + 0.5 * dt * k1, p))
    k3 = _slope(_as_rates(t + 0.5 * dt, x + 0.5 * dt * k2, p))
    k4 = _slope(_as_rates(t + dt, x + dt * k3, p))
    out = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)) or np.any(out <= 0):
        raise StateBlowupError(f"RK4 step from t={t} (dt={dt}) left the physical domain")
    return out


def rk4_step(t: float, s: GlacierState, dt: float, p: ModelParams) -> GlacierState:
    """Advance one state by one classical RK4 step.

    Raises
    ------
    StateBlowupError
        If the result is non-finite or non-positive.
    NonMarineBedError
        If a stage evaluation finds the grounding line on non-marine bed.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    return GlacierState.from_array(_rk4(t, s.as_array(), dt, p))


def rk4_array_step(x: np.ndarray, t: float, dt: float, p: ModelParams) -> np.ndarray:
    """RK4 step for a batch of states, shape ``(..., 2)`` as ``[H, L]``."""
    return _rk4(t, np.asarray(x, dtype=float), dt, p)


def glacier_propagator(p: ModelParams) -> Propagator:
    """Bind the glacier model to ``p`` as an ensemble propagator."""

    def propagate(x: np.ndarray, t: float, dt: float) -> np.ndarray:
        return rk4_array_step(x, t, dt, p)

    return propagate


@dataclass
class Trajectory:
    """Time series of states and flux diagnostics (SI units).

    All arrays share the length of ``t``; diagnostics are evaluated at the
    recorded state.
    """

    t: np.ndarray
    H: np.ndarray
    L: np.ndarray
    h_g: np.ndarray
    Q: np.ndarray
    Q_g: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def state(self, i: int) -> GlacierState:
        return GlacierState(H=float(self.H[i]), L=float(self.L[i]))

    def at(self, t: float) -> np.ndarray:
        """State ``[H, L]`` at year ``t``, linearly interpolated between records."""
        if t < self.t[0] - 1e-9 or t > self.t[-1] + 1e-9:
            raise ValidationError(f"time {t} outside trajectory [{self.t[0]}, {self.t[-1]}]")
        return np.array([np.interp(t, self.t, self.H), np.interp(t, self.t, self.L)])

    def to_frame(self, display_units: bool = False) -> pd.DataFrame:
        H, L = to_display(self.H, self.L) if display_units else (self.H, self.L)
        return pd.DataFrame(
            {"t": self.t, "H": H, "L": L, "h_g": self.h_g, "Q": self.Q, "Q_g": self.Q_g}
        )


def diagnose(t: np.ndarray, H: np.ndarray, L: np.ndarray, p: ModelParams) -> Trajectory:
    """Evaluate flux diagnostics along a given state series."""
    t = np.asarray(t, dtype=float)
    H = np.asarray(H, dtype=float)
    L = np.asarray(L, dtype=float)
    h_g = np.empty_like(t)
    Q = np.empty_like(t)
    Q_g = np.empty_like(t)
    for i, ti in enumerate(t):
        r = rates(float(ti), H[i], L[i], p)
        h_g[i], Q[i], Q_g[i] = r.h_g, r.Q, r.Q_g
    return Trajectory(t=t, H=H, L=L, h_g=h_g, Q=Q, Q_g=Q_g)


def integrate(
    t0: float, t1: float, s0: GlacierState, p: ModelParams, dt: float = 0.1
) -> Trajectory:
    """Integrate the model from ``t0`` to ``t1`` with fixed RK4 steps.

    Parameters
    ----------
    t0, t1 : float
        Window in years, ``t0 <= t1``. ``t1 == t0`` returns the single
        initial record.
    s0 : GlacierState
        Initial state.
    p : ModelParams
        Calibrated parameters.
    dt : float
        Step in years; the last step is shortened to land on ``t1``.

    Returns
    -------
    Trajectory
        One record per model output time, diagnostics included.
    """
    times = time_grid(t0, t1, dt)
    n = len(times)
    X = np.empty((n, 2))
    h_g = np.empty(n)
    Q = np.empty(n)
    Q_g = np.empty(n)

    x = s0.as_array()
    for i, ti in enumerate(times):
        X[i] = x
        r = _as_rates(float(ti), x, p)
        h_g[i], Q[i], Q_g[i] = r.h_g, r.Q, r.Q_g
        if i + 1 < n:
            x = _rk4(float(ti), x, float(times[i + 1] - ti), p, k1=_slope(r))

    return Trajectory(t=times, H=X[:, 0], L=X[:, 1], h_g=h_g, Q=Q, Q_g=Q_g)
