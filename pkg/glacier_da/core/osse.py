"""Twin experiments: truth run, synthetic observations, assimilation and scoring."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from glacier_da.core import rng
from glacier_da.core.dynamics import calibrate_constants, with_constants
from glacier_da.core.enkf import ObservationSet, assimilation_cycle, init_ensemble
from glacier_da.core.errors import ValidationError
from glacier_da.core.integrate import Trajectory, diagnose, glacier_propagator, integrate
from glacier_da.core.models import (
    H_DISPLAY_SCALE,
    L_DISPLAY_SCALE,
    FilterConfig,
    ModelParams,
    ObservationSchedule,
    TwinSetup,
    display_scale,
    inaccurate_params,
    twin_filter,
)

log = logging.getLogger(__name__)

RUNRECORD_COLUMNS = [
    "t",
    "H_truth",
    "L_truth",
    "H_analysis",
    "L_analysis",
    "H_obs",
    "L_obs",
    "P_HH",
    "P_LL",
]


def default_twin_setup(dt: float = 0.1, N: int = 10, seed: int = 0) -> TwinSetup:
    """True/Inaccurate twin configuration with the default noise model.

    The truth parameters are calibrated to equilibrium at t = 0 and the
    inaccurate parameters reuse the same gamma and omega. The filter adds
    ``TWIN_MODEL_NOISE_COV`` once per assimilation interval.
    """
    p_true = calibrate_constants(ModelParams())
    p_inaccurate = with_constants(inaccurate_params(), p_true)
    return TwinSetup(
        p_true=p_true,
        p_inaccurate=p_inaccurate,
        filter=twin_filter(N=N, seed=seed),
        dt=dt,
    )


@dataclass
class TruthRun:
    """The reference trajectory a twin experiment is scored against."""

    trajectory: Trajectory
    params: ModelParams

    @property
    def t(self) -> np.ndarray:
        return self.trajectory.t

    def state_at(self, t: float) -> np.ndarray:
        return self.trajectory.at(t)

    def to_csv_frame(self, display_units: bool = True) -> pd.DataFrame:
        """Truth-only rows of the ``runrecord`` CSV schema (filter columns empty)."""
        H, L = self.trajectory.H, self.trajectory.L
        if display_units:
            H, L = H / H_DISPLAY_SCALE, L / L_DISPLAY_SCALE
        frame = pd.DataFrame({"t": self.t, "H_truth": H, "L_truth": L})
        for col in RUNRECORD_COLUMNS[3:]:
            frame[col] = np.nan
        return frame


def make_truth(p_true: ModelParams, window: tuple[float, float], dt: float) -> TruthRun:
    """Integrate the true model over ``window``."""
    t0, t1 = window
    trajectory = integrate(t0, t1, p_true.initial_state(), p_true, dt=dt)
    return TruthRun(trajectory=trajectory, params=p_true)


def synthesize_observations(
    truth: TruthRun, schedule: ObservationSchedule, seed: int
) -> list[ObservationSet]:
    """Noisy identity observations of the truth at every scheduled time.

    ``sigma = max(rel_noise * |truth|, abs_floor)`` per component; the
    draw for the k-th scheduled time uses its own substream of ``seed``.
    """
    rel = np.asarray(schedule.rel_noise, dtype=float)
    floor = np.asarray(schedule.abs_floor, dtype=float)
    out = []
    for k, t in enumerate(schedule.times):
        x = truth.state_at(t)
        sigma = np.maximum(rel * np.abs(x), floor)
        z = rng.substream(seed, rng.SYNTHETIC_OBS, k).standard_normal(x.shape[0])
        out.append(
            ObservationSet(y=x + sigma * z, R=np.diag(sigma**2), Hop=np.eye(x.shape[0]), t=t)
        )
    return out


@dataclass
class RunRecord:
    """Time-indexed output of one twin run (SI units).

    ``frame`` has one row per model output time with columns ``t``,
    ``{H,L}_truth``, ``{H,L}_forecast``, ``{H,L}_analysis``, ``{H,L}_obs``
    (NaN off-schedule), ``P_HH``, ``P_LL``, ``{H,L}_background`` and
    ``analysed``.
    """

    frame: pd.DataFrame
    model_params: ModelParams
    members: np.ndarray | None = None

    @property
    def t(self) -> np.ndarray:
        return self.frame["t"].to_numpy()

    @property
    def n_analyses(self) -> int:
        return int(self.frame["analysed"].sum())

    @property
    def analysis_times(self) -> np.ndarray:
        return self.frame.loc[self.frame["analysed"], "t"].to_numpy()

    def truth(self) -> np.ndarray:
        return self.frame[["H_truth", "L_truth"]].to_numpy()

    def analysis(self) -> np.ndarray:
        return self.frame[["H_analysis", "L_analysis"]].to_numpy()

    def row(self, t: float) -> pd.Series:
        idx = np.flatnonzero(np.isclose(self.t, t, rtol=0.0, atol=1e-6))
        if idx.size == 0:
            raise ValidationError(f"time {t} is not in the run record")
        return self.frame.iloc[int(idx[0])]

    def diagnostics(self) -> Trajectory:
        """Flux diagnostics along the analysis-mean trajectory."""
        return diagnose(
            self.t,
            self.frame["H_analysis"].to_numpy(),
            self.frame["L_analysis"].to_numpy(),
            self.model_params,
        )

    def to_csv_frame(self, display_units: bool = True) -> pd.DataFrame:
        """Rows of the ``runrecord`` CSV schema."""
        out = self.frame[RUNRECORD_COLUMNS].copy()
        if display_units:
            for col in ("H_truth", "H_analysis", "H_obs"):
                out[col] = out[col] / H_DISPLAY_SCALE
            for col in ("L_truth", "L_analysis", "L_obs"):
                out[col] = out[col] / L_DISPLAY_SCALE
            out["P_HH"] = out["P_HH"] / H_DISPLAY_SCALE**2
            out["P_LL"] = out["P_LL"] / L_DISPLAY_SCALE**2
        return out


@dataclass(frozen=True)
class Metrics:
    """Mean square differences in display units squared over ``window``."""

    msd_H: float
    msd_L: float
    window: tuple[float, float]

    def as_array(self) -> np.ndarray:
        return np.array([self.msd_H, self.msd_L])


def run_twin(
    p_true: ModelParams,
    p_inaccurate: ModelParams,
    schedule: ObservationSchedule,
    cfg: FilterConfig,
    window: tuple[float, float] = (0.0, 2300.0),
    dt: float = 0.1,
    *,
    spread: float = 0.02,
    truth: TruthRun | None = None,
    keep_members: bool = False,
) -> RunRecord:
    """Run one twin experiment.

    Parameters
    ----------
    p_true, p_inaccurate : ModelParams
        Truth parameters and the parameters of the model inside the filter.
    schedule : ObservationSchedule
        Observation times (on the model grid) and noise model.
    cfg : FilterConfig
        Filter settings; ``cfg.seed`` also seeds the synthetic observations.
    window : tuple of float
        Run window, years.
    dt : float
        Model step shared by truth and filter.
    spread : float
        Initial ensemble std dev as a fraction of the inaccurate initial state.
    truth : TruthRun, optional
        Precomputed truth on the same window and grid.
    keep_members : bool
        Keep per-member states in ``RunRecord.members``.

    Returns
    -------
    RunRecord
    """
    t0, t1 = window
    if any(t < t0 or t > t1 for t in schedule.times):
        raise ValidationError(f"schedule times must lie in the run window [{t0}, {t1}]")
    if truth is None:
        truth = make_truth(p_true, window, dt)

    observations = synthesize_observations(truth, schedule, cfg.seed)
    by_time = {round(obs.t, 6): obs for obs in observations}

    mean0 = p_inaccurate.initial_state().as_array()
    ens = init_ensemble(mean0, spread * mean0, cfg, t=t0)
    log.info(
        "twin run [%s, %s] dt=%s N=%d seed=%d observations=%d",
        t0,
        t1,
        dt,
        cfg.N,
        cfg.seed,
        len(schedule),
    )
    out = assimilation_cycle(
        ens,
        glacier_propagator(p_inaccurate),
        schedule.times,
        lambda t: by_time[round(t, 6)],
        cfg,
        t1=t1,
        dt=dt,
        keep_members=keep_members,
    )
    if len(out.times) != len(truth.t):
        raise ValidationError("truth run and filter run are on different time grids")
    background = integrate(t0, t1, p_inaccurate.initial_state(), p_inaccurate, dt=dt)

    obs_values = np.full((len(out.times), 2), np.nan)
    for i in np.flatnonzero(out.analysed):
        obs_values[i] = by_time[round(float(out.times[i]), 6)].y

    frame = pd.DataFrame(
        {
            "t": out.times,
            "H_truth": truth.trajectory.H,
            "L_truth": truth.trajectory.L,
            "H_forecast": out.forecast_mean[:, 0],
            "L_forecast": out.forecast_mean[:, 1],
            "H_analysis": out.analysis_mean[:, 0],
            "L_analysis": out.analysis_mean[:, 1],
            "H_obs": obs_values[:, 0],
            "L_obs": obs_values[:, 1],
            "P_HH": out.analysis_var[:, 0],
            "P_LL": out.analysis_var[:, 1],
            "H_background": background.H,
            "L_background": background.L,
            "analysed": out.analysed,
        }
    )
    return RunRecord(frame=frame, model_params=p_inaccurate, members=out.members)


def run_setup(
    setup: TwinSetup,
    times: Sequence[float],
    *,
    truth: TruthRun | None = None,
    keep_members: bool = False,
) -> RunRecord:
    """``run_twin`` driven by a ``TwinSetup`` and a list of observation times."""
    return run_twin(
        setup.p_true,
        setup.p_inaccurate,
        setup.schedule(times),
        setup.filter,
        setup.window,
        setup.dt,
        spread=setup.spread,
        truth=truth,
        keep_members=keep_members,
    )


def square_difference(record: RunRecord, t: float) -> np.ndarray:
    """Componentwise ``(truth - analysis)^2`` at year ``t``, display units."""
    row = record.row(t)
    truth = np.array([row["H_truth"], row["L_truth"]]) / display_scale()
    analysis = np.array([row["H_analysis"], row["L_analysis"]]) / display_scale()
    return np.asarray((truth - analysis) ** 2)


def mean_square_difference(
    record: RunRecord, window: tuple[float, float] | None = None
) -> Metrics:
    """Mean of the square difference over every recorded time in ``window``.

    ``window`` is inclusive and defaults to the whole record.
    """
    t = record.t
    a, b = window if window is not None else (float(t[0]), float(t[-1]))
    mask = (t >= a - 1e-9) & (t <= b + 1e-9)
    if not mask.any():
        raise ValidationError(f"no recorded times in window [{a}, {b}]")
    diff = (record.truth()[mask] - record.analysis()[mask]) / display_scale()
    msd = np.mean(diff**2, axis=0)
    return Metrics(msd_H=float(msd[0]), msd_L=float(msd[1]), window=(float(a), float(b)))
