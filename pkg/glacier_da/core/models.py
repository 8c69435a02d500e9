"""Core data models for the two-stage glacier model and its assimilation runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from glacier_da.core.errors import ValidationError

# Display units of the parameter set: H in km, L in units of 100 km,
# sill positions in km. Everything inside the model is SI (m, yr).
H_DISPLAY_SCALE = 1.0e3
L_DISPLAY_SCALE = 1.0e5
KM = 1.0e3

# Standard seawater and glacial ice densities, kg/m^3.
RHO_SEAWATER = 1028.0
RHO_ICE = 917.0

STATE_DIM = 2

# Additive model noise of the twin experiments, m^2 per assimilation
# interval: none on H, (2 km)^2 on L.
TWIN_MODEL_NOISE_COV: tuple[tuple[float, ...], ...] = ((0.0, 0.0), (0.0, 4.0e6))


def to_display(H: Any, L: Any) -> tuple[Any, Any]:
    """Convert SI thickness/length (m) to display units (km, 100 km)."""
    return H / H_DISPLAY_SCALE, L / L_DISPLAY_SCALE


def display_scale() -> np.ndarray:
    """Per-component divisor mapping an SI state vector to display units."""
    return np.array([H_DISPLAY_SCALE, L_DISPLAY_SCALE])


@dataclass(frozen=True)
class GlacierState:
    """Assimilated glacier state.

    Attributes
    ----------
    H : float
        Interior ice thickness, m. Must be finite and > 0.
    L : float
        Glacier length (grounding-line position), m. Must be finite and > 0.
    """

    H: float
    L: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.H) and math.isfinite(self.L)):
            raise ValidationError(f"state must be finite, got H={self.H}, L={self.L}")
        if self.H <= 0 or self.L <= 0:
            raise ValidationError(f"state must be positive, got H={self.H}, L={self.L}")

    def as_array(self) -> np.ndarray:
        return np.array([self.H, self.L], dtype=float)

    @classmethod
    def from_array(cls, x: np.ndarray) -> GlacierState:
        return cls(H=float(x[0]), L=float(x[1]))

    def display(self) -> tuple[float, float]:
        """Return ``(H, L)`` in display units."""
        return to_display(self.H, self.L)


@dataclass(frozen=True)
class Derivative:
    """Time derivative of the glacier state, m/yr."""

    dH_dt: float
    dL_dt: float


@dataclass(frozen=True)
class FluxDiagnostics:
    """Fluxes evaluated at one state.

    Attributes
    ----------
    h_g : float
        Grounding-line thickness, m.
    Q : float
        Interior flux, m^2/yr.
    Q_g : float
        Grounding-line flux, m^2/yr.
    """

    h_g: float
    Q: float
    Q_g: float


@dataclass(frozen=True)
class ModelParams:
    """Forcing, geometry and physical constants of the two-stage model.

    Defaults are the true parameters of the twin experiments.
    Lengths are in display units (see module constants); all
    other quantities are SI.

    Attributes
    ----------
    smb_o, smb_1, smb_f : float
        Surface mass balance at year 0, ``t_mid`` and ``t_end``, m ice/yr.
    H_o : float
        Initial thickness, km.
    L_o : float
        Initial length, units of 100 km.
    b_x : float
        Prograde bed slope (negative seaward-deepening), dimensionless.
    sill_min, sill_max : float
        Start and end of the sill, km.
    sill_slope : float
        Reverse slope on the sill, dimensionless.
    b0 : float
        Bed elevation at x = 0, m.
    lam : float
        Seawater/ice density ratio (config key ``lambda``).
    n : float
        Interior-flux exponent (Glen's law).
    beta : float
        Grounding-flux exponent.
    gamma, omega : float or None
        Flux coefficients. ``None`` until ``calibrate_constants`` fills them.
    t_mid, t_end : float
        Forcing breakpoint years.
    """

    smb_o: float = 0.3
    smb_1: float = 0.15
    smb_f: float = 0.0
    H_o: float = 2.18
    L_o: float = 4.44
    b_x: float = -0.001
    sill_min: float = 415.0
    sill_max: float = 425.0
    sill_slope: float = 0.01
    b0: float = 0.0
    lam: float = RHO_SEAWATER / RHO_ICE
    n: float = 3.0
    beta: float = 4.0
    gamma: float | None = None
    omega: float | None = None
    t_mid: float = 1950.0
    t_end: float = 2300.0

    def __post_init__(self) -> None:
        for name in ("smb_o", "smb_1", "smb_f"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.H_o <= 0 or self.L_o <= 0:
            raise ValidationError(f"H_o and L_o must be > 0, got {self.H_o}, {self.L_o}")
        if not self.sill_min < self.sill_max:
            raise ValidationError(
                f"sill_min must be < sill_max, got {self.sill_min} >= {self.sill_max}"
            )
        if self.b_x < 0 and self.sill_slope <= 0:
            raise ValidationError(
                f"sill_slope must be > 0 while b_x < 0, got {self.sill_slope}"
            )
        if self.lam <= 1:
            raise ValidationError(f"lambda must be > 1, got {self.lam}")
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if self.beta < 1:
            raise ValidationError(f"beta must be >= 1, got {self.beta}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValidationError(f"gamma must be > 0, got {self.gamma}")
        if self.omega is not None and not self.omega > 0:
            raise ValidationError(f"omega must be > 0, got {self.omega}")
        if not 0 < self.t_mid < self.t_end:
            raise ValidationError(
                f"forcing breakpoints must satisfy 0 < t_mid < t_end, "
                f"got t_mid={self.t_mid}, t_end={self.t_end}"
            )

    @property
    def H0(self) -> float:
        """Initial thickness, m."""
        return self.H_o * H_DISPLAY_SCALE

    @property
    def L0(self) -> float:
        """Initial length, m."""
        return self.L_o * L_DISPLAY_SCALE

    @property
    def sill_start(self) -> float:
        """Sill start position, m."""
        return self.sill_min * KM

    @property
    def sill_end(self) -> float:
        """Sill end position, m."""
        return self.sill_max * KM

    @property
    def calibrated(self) -> bool:
        return self.gamma is not None and self.omega is not None

    def initial_state(self) -> GlacierState:
        return GlacierState(H=self.H0, L=self.L0)


def inaccurate_params(**overrides: Any) -> ModelParams:
    """Return the inaccurate parameters of the twin experiments.

    smb_o 0.3 -> 0.35, H_o 2.18 -> 2.3, L_o 4.44 -> 4.6, sill_slope 0.01 -> 0.008.
    """
    values: dict[str, Any] = dict(smb_o=0.35, H_o=2.3, L_o=4.6, sill_slope=0.008)
    values.update(overrides)
    return ModelParams(**values)


@dataclass(frozen=True)
class FilterConfig:
    """Ensemble Kalman Filter settings.

    Attributes
    ----------
    N : int
        Ensemble size, >= 2.
    seed : int
        Root seed; every random draw of a run derives from it.
    inflation : float
        Multiplicative inflation of the forecast sample covariance, >= 1.
    model_noise_cov : tuple of tuple of float or None
        Additive model-noise covariance Q_t (d x d, PSD) applied once per
        assimilation interval. ``None`` means zero noise.
    """

    N: int = 10
    seed: int = 0
    inflation: float = 1.0
    model_noise_cov: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.N < 2:
            raise ValidationError(f"ensemble size N must be >= 2, got {self.N}")
        if self.inflation < 1:
            raise ValidationError(f"inflation must be >= 1, got {self.inflation}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")
        if self.model_noise_cov is not None:
            q = np.asarray(self.model_noise_cov, dtype=float)
            if q.ndim != 2 or q.shape[0] != q.shape[1]:
                raise ValidationError(f"model_noise_cov must be square, got shape {q.shape}")
            if not np.allclose(q, q.T):
                raise ValidationError("model_noise_cov must be symmetric")
            if np.linalg.eigvalsh(q).min() < -1e-12:
                raise ValidationError("model_noise_cov must be positive semi-definite")

    def noise_cov(self, d: int) -> np.ndarray:
        """Model-noise covariance as a ``d x d`` array (zeros when unset)."""
        if self.model_noise_cov is None:
            return np.zeros((d, d))
        q = np.asarray(self.model_noise_cov, dtype=float)
        if q.shape != (d, d):
            raise ValidationError(f"model_noise_cov must be {d}x{d}, got {q.shape}")
        return q


def twin_filter(**changes: Any) -> FilterConfig:
    """``FilterConfig`` carrying ``TWIN_MODEL_NOISE_COV`` unless ``changes`` override it."""
    values: dict[str, Any] = {"model_noise_cov": TWIN_MODEL_NOISE_COV}
    values.update(changes)
    return FilterConfig(**values)


@dataclass(frozen=True)
class ObservationSchedule:
    """When observations occur and how noisy they are.

    Attributes
    ----------
    times : tuple of float
        Strictly increasing observation years.
    rel_noise : tuple of float
        Per-component standard deviation as a fraction of the true value.
    abs_floor : tuple of float
        Per-component minimum standard deviation, SI units.
    """

    times: tuple[float, ...] = ()
    rel_noise: tuple[float, ...] = (0.01, 0.01)
    abs_floor: tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValidationError("observation times must be strictly increasing")
        if any(r < 0 for r in self.rel_noise):
            raise ValidationError(f"rel_noise must be >= 0, got {self.rel_noise}")
        if any(f < 0 for f in self.abs_floor):
            raise ValidationError(f"abs_floor must be >= 0, got {self.abs_floor}")
        if len(self.rel_noise) != len(self.abs_floor):
            raise ValidationError("rel_noise and abs_floor must have the same length")

    def __len__(self) -> int:
        return len(self.times)

    def within(self, start: float, end: float) -> ObservationSchedule:
        """Restrict to times in ``[start, end]``."""
        kept = tuple(t for t in self.times if start <= t <= end)
        return ObservationSchedule(kept, self.rel_noise, self.abs_floor)

    def union(self, other: ObservationSchedule) -> ObservationSchedule:
        times = tuple(sorted(set(self.times) | set(other.times)))
        return ObservationSchedule(times, self.rel_noise, self.abs_floor)


# Observation eras and the windows they assimilate and score on.
ERA_WINDOWS: dict[str, tuple[float, float]] = {
    "pre1900": (0.0, 1900.0),
    "post1950": (1950.0, 2300.0),
}


@dataclass(frozen=True)
class SchemeSpec:
    """A regular observation scheme over one era.

    Times are ``start, start + interval, ...`` strictly below ``end``, so the
    pre-1900 era at 19 years gives 100 observations and the post-1950 era at
    1 year gives 350.

    Attributes
    ----------
    era : str
        One of ``"pre1900"``, ``"post1950"``, ``"composite"``, ``"custom"``.
    interval : float
        Years between observations, > 0.
    start, end : float
        Half-open observation window ``[start, end)``.
    """

    era: str = "custom"
    interval: float = 1.0
    start: float = 0.0
    end: float = 2300.0

    def __post_init__(self) -> None:
        valid_eras = ("pre1900", "post1950", "composite", "custom")
        if self.era not in valid_eras:
            raise ValidationError(f"scheme era must be one of {valid_eras}, got '{self.era}'")
        if not self.start < self.end:
            raise ValidationError(f"scheme start must be < end, got {self.start}, {self.end}")
        if not self.interval > 0:
            raise ValidationError(f"scheme interval must be > 0, got {self.interval}")

    @classmethod
    def for_era(cls, era: str, interval: float) -> SchemeSpec:
        if era not in ERA_WINDOWS:
            raise ValidationError(f"era must be one of {tuple(ERA_WINDOWS)}, got '{era}'")
        start, end = ERA_WINDOWS[era]
        return cls(era=era, interval=interval, start=start, end=end)

    @property
    def window(self) -> tuple[float, float]:
        return ERA_WINDOWS.get(self.era, (self.start, self.end))

    def times(self) -> tuple[float, ...]:
        count = math.ceil((self.end - self.start) / self.interval - 1e-9)
        return tuple(float(self.start + k * self.interval) for k in range(count))


@dataclass(frozen=True)
class TwinSetup:
    """Everything a twin experiment needs besides its observation times.

    Attributes
    ----------
    p_true : ModelParams
        Parameters of the truth run (calibrated).
    p_inaccurate : ModelParams
        Parameters of the model inside the filter (calibrated).
    filter : FilterConfig
        Ensemble size, seed, inflation and model noise.
    spread : float
        Initial ensemble standard deviation as a fraction of the inaccurate
        initial state.
    rel_noise, abs_floor : tuple of float
        Observation noise model, see ``ObservationSchedule``.
    window : tuple of float
        Run window ``(t0, t1)`` in years.
    dt : float
        Model step shared by truth and filter, years.
    """

    p_true: ModelParams
    p_inaccurate: ModelParams
    filter: FilterConfig = field(default_factory=twin_filter)
    spread: float = 0.02
    rel_noise: tuple[float, ...] = (0.01, 0.01)
    abs_floor: tuple[float, ...] = (0.0, 0.0)
    window: tuple[float, float] = (0.0, 2300.0)
    dt: float = 0.1

    def __post_init__(self) -> None:
        if self.spread < 0:
            raise ValidationError(f"spread must be >= 0, got {self.spread}")
        if not self.window[0] <= self.window[1]:
            raise ValidationError(f"window must satisfy t0 <= t1, got {self.window}")
        if not self.dt > 0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")

    def schedule(self, times: Any = ()) -> ObservationSchedule:
        """Observation schedule at ``times`` with this setup's noise model."""
        return ObservationSchedule(tuple(float(t) for t in times), self.rel_noise, self.abs_floor)

    def with_filter(self, **changes: Any) -> TwinSetup:
        """Copy with some ``FilterConfig`` fields replaced."""
        return replace(self, filter=replace(self.filter, **changes))
