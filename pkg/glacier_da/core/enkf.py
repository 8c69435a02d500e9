"""Stochastic Ensemble Kalman Filter with perturbed observations.

Forecast:  x_f^(i) = M x^(i) + w^(i)
Gain:      K = C H' (H C H' + R)^-1,  C = inflation * sample_cov(x_f)
Analysis:  x_a^(i) = x_f^(i) + K (y + v^(i) - H x_f^(i)),  v^(i) ~ N(0, R)

Sample covariances are taken about the current ensemble mean. The module
knows nothing about glaciers; the model enters only through a propagator
``(states, t, dt) -> states``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from glacier_da.core import rng
from glacier_da.core.errors import SingularInnovationError, ValidationError
from glacier_da.core.integrate import Propagator, grid_index, time_grid
from glacier_da.core.models import FilterConfig

log = logging.getLogger(__name__)

# Innovation covariances above this condition number are treated as singular.
MAX_INNOVATION_CONDITION = 1e13


@dataclass
class Ensemble:
    """``N`` state vectors of dimension ``d`` valid at year ``t``."""

    members: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        self.members = np.atleast_2d(np.asarray(self.members, dtype=float))
        if self.members.shape[0] < 2:
            raise ValidationError(f"ensemble needs N >= 2 members, got {self.members.shape[0]}")
        if not np.all(np.isfinite(self.members)):
            raise ValidationError("ensemble members must be finite")

    @property
    def N(self) -> int:
        return int(self.members.shape[0])

    @property
    def d(self) -> int:
        return int(self.members.shape[1])

    @property
    def mean(self) -> np.ndarray:
        return self.members.mean(axis=0)


@dataclass
class ObservationSet:
    """Observation ``y = Hop x + v``, ``v ~ N(0, R)``, valid at year ``t``."""

    y: np.ndarray
    R: np.ndarray
    Hop: np.ndarray
    t: float

    def __post_init__(self) -> None:
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.Hop = np.atleast_2d(np.asarray(self.Hop, dtype=float))
        m = self.y.shape[0]
        if self.R.shape != (m, m) or self.Hop.shape[0] != m:
            raise ValidationError(
                f"observation shapes disagree: y {self.y.shape}, R {self.R.shape}, "
                f"Hop {self.Hop.shape}"
            )
        if not np.allclose(self.R, self.R.T):
            raise ValidationError("observation covariance R must be symmetric")
        if m > self.Hop.shape[1]:
            raise ValidationError("more observations than state components")


@dataclass
class AnalysisResult:
    """Outcome of one analysis step.

    Attributes
    ----------
    ensemble : Ensemble
        Analysis ensemble.
    mean : ndarray
        Analysis mean x_a.
    forecast_cov : ndarray
        Forecast sample covariance P_f (before inflation).
    analysis_cov : ndarray
        Analysis sample covariance about x_a.
    gain : ndarray
        Kalman gain K, shape ``(d, m)``.
    perturbed_obs : ndarray
        Per-member perturbed observations y + v^(i), shape ``(N, m)``.
    """

    ensemble: Ensemble
    mean: np.ndarray
    forecast_cov: np.ndarray
    analysis_cov: np.ndarray
    gain: np.ndarray
    perturbed_obs: np.ndarray


def init_ensemble(
    mean: np.ndarray, spread: np.ndarray, cfg: FilterConfig, t: float = 0.0
) -> Ensemble:
    """Draw ``cfg.N`` members from N(mean, diag(spread^2)).

    Draws come from the ensemble-initialisation substream of ``cfg.seed``.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    spread = np.broadcast_to(np.asarray(spread, dtype=float), mean.shape)
    if np.any(spread < 0):
        raise ValidationError(f"ensemble spread must be >= 0, got {spread}")
    draws = rng.member_normals(cfg.seed, rng.INIT_ENSEMBLE, 0, cfg.N, np.diag(spread**2))
    return Ensemble(members=mean + draws, t=t)


def sample_covariance(ens: Ensemble) -> np.ndarray:
    """Unbiased sample covariance about the ensemble mean, ``d x d``."""
    anomalies = ens.members - ens.mean
    C = anomalies.T @ anomalies / (ens.N - 1)
    return 0.5 * (C + C.T)


def kalman_gain(C: np.ndarray, Hop: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Kalman gain ``K = C H' (H C H' + R)^-1`` via a symmetric solve.

    A zero ``H C`` gives a zero gain whatever ``R`` is.

    Raises
    ------
    SingularInnovationError
        If the innovation covariance is numerically singular.
    """
    C = np.atleast_2d(C)
    Hop = np.atleast_2d(Hop)
    R = np.atleast_2d(R)
    HC = Hop @ C
    if not np.any(HC):
        # no forecast uncertainty in observed space: the model is trusted fully
        return np.zeros((C.shape[0], Hop.shape[0]))
    S = HC @ Hop.T + R
    S = 0.5 * (S + S.T)
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > MAX_INNOVATION_CONDITION:
        raise SingularInnovationError("innovation covariance H C H' + R is singular")
    try:
        # K' = S^-1 H C, using C = C'
        Kt = linalg.solve(S, HC, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise SingularInnovationError(f"innovation covariance not invertible: {exc}") from exc
    return np.asarray(Kt.T)


def forecast(
    ens: Ensemble,
    propagator: Propagator,
    t1: float,
    cfg: FilterConfig,
    *,
    dt: float | None = None,
    cycle: int = 0,
) -> Ensemble:
    """Advance every member to ``t1`` and add model noise once.

    Parameters
    ----------
    ens : Ensemble
        Ensemble valid at ``ens.t``.
    propagator : callable
        ``(states, t, dt) -> states`` acting on an ``(N, d)`` array.
    t1 : float
        Target year, ``>= ens.t``.
    cfg : FilterConfig
        Supplies the seed and model-noise covariance.
    dt : float or None
        Internal step; ``None`` takes a single step to ``t1``.
    cycle : int
        Counter selecting the model-noise substream.
    """
    if t1 < ens.t:
        raise ValidationError(f"forecast target {t1} precedes ensemble time {ens.t}")
    X = ens.members.copy()
    if t1 > ens.t:
        times = time_grid(ens.t, t1, dt if dt is not None else t1 - ens.t)
        for a, b in zip(times[:-1], times[1:]):
            X = propagator(X, float(a), float(b - a))
        X = X + rng.member_normals(cfg.seed, rng.MODEL_NOISE, cycle, ens.N, cfg.noise_cov(ens.d))
    return Ensemble(members=X, t=t1)


def analysis(
    ens: Ensemble, obs: ObservationSet, cfg: FilterConfig, *, cycle: int = 0
) -> AnalysisResult:
    """Perturbed-observation analysis of a forecast ensemble.

    Raises
    ------
    SingularInnovationError
        Propagated from the gain computation.
    """
    if abs(obs.t - ens.t) > 1e-9 * max(1.0, abs(ens.t)):
        raise ValidationError(f"observation at t={obs.t} does not match ensemble t={ens.t}")
    Xf = ens.members
    Pf = sample_covariance(ens)
    K = kalman_gain(cfg.inflation * Pf, obs.Hop, obs.R)

    Y = obs.y + rng.member_normals(cfg.seed, rng.OBS_PERTURBATION, cycle, ens.N, obs.R)
    Xa = Xf + (Y - Xf @ obs.Hop.T) @ K.T
    analysed = Ensemble(members=Xa, t=ens.t)
    log.debug("analysis t=%s cycle=%d gain diag=%s", ens.t, cycle, np.diag(K))
    return AnalysisResult(
        ensemble=analysed,
        mean=analysed.mean,
        forecast_cov=Pf,
        analysis_cov=sample_covariance(analysed),
        gain=K,
        perturbed_obs=Y,
    )


@dataclass
class CycleOutput:
    """Per-model-time output of an assimilation run.

    Arrays are indexed by model output time; ``members`` is only kept on
    request and has shape ``(times, N, d)``.
    """

    times: np.ndarray
    forecast_mean: np.ndarray
    analysis_mean: np.ndarray
    analysis_var: np.ndarray
    analysed: np.ndarray
    final: Ensemble
    members: np.ndarray | None = None
    analysis_times: list[float] = field(default_factory=list)

    @property
    def n_analyses(self) -> int:
        return int(self.analysed.sum())


def assimilation_cycle(
    ens: Ensemble,
    propagator: Propagator,
    schedule: Sequence[float],
    obs_source: Callable[[float], ObservationSet],
    cfg: FilterConfig,
    *,
    t1: float,
    dt: float,
    keep_members: bool = False,
) -> CycleOutput:
    """Run forecast/analysis cycles from ``ens.t`` to ``t1``.

    Members are stepped on the model grid. At each scheduled time the
    ensemble receives model noise (when configured) and an analysis against
    ``obs_source(t)``; between observations the forecast mean and variance
    are recorded unchanged.

    Parameters
    ----------
    ens : Ensemble
        Initial ensemble at the run start.
    propagator : callable
        ``(states, t, dt) -> states``.
    schedule : sequence of float
        Strictly increasing observation years on the model grid.
    obs_source : callable
        Returns the ``ObservationSet`` for a scheduled year.
    cfg : FilterConfig
        Filter settings.
    t1 : float
        End year.
    dt : float
        Model step, years.
    keep_members : bool
        Store every member state at every output time.
    """
    times = time_grid(ens.t, t1, dt)
    schedule = [float(t) for t in schedule]
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValidationError("schedule times must be strictly increasing")
    obs_index = {grid_index(times, t, dt): k for k, t in enumerate(schedule)}

    n, d = len(times), ens.d
    forecast_mean = np.empty((n, d))
    analysis_mean = np.empty((n, d))
    analysis_var = np.empty((n, d))
    analysed = np.zeros(n, dtype=bool)
    members = np.empty((n, ens.N, d)) if keep_members else None
    noise_cov = cfg.noise_cov(d)

    X = ens.members.copy()
    for i, ti in enumerate(times):
        if i > 0:
            X = propagator(X, float(times[i - 1]), float(ti - times[i - 1]))
        forecast_mean[i] = X.mean(axis=0)

        cycle = obs_index.get(i)
        if cycle is not None:
            if i > 0:
                X = X + rng.member_normals(cfg.seed, rng.MODEL_NOISE, cycle, ens.N, noise_cov)
            result = analysis(Ensemble(X, float(ti)), obs_source(float(ti)), cfg, cycle=cycle)
            X = result.ensemble.members
            analysed[i] = True

        analysis_mean[i] = X.mean(axis=0)
        analysis_var[i] = X.var(axis=0, ddof=1)
        if members is not None:
            members[i] = X

    log.info(
        "assimilation %s-%s: %d steps, %d analyses, N=%d",
        times[0],
        times[-1],
        n - 1,
        int(analysed.sum()),
        ens.N,
    )
    return CycleOutput(
        times=times,
        forecast_mean=forecast_mean,
        analysis_mean=analysis_mean,
        analysis_var=analysis_var,
        analysed=analysed,
        final=Ensemble(X, float(times[-1])),
        members=members,
        analysis_times=[float(times[i]) for i in sorted(obs_index)],
    )
