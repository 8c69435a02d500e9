"""Sensitivity study, sweeps and the headline twin runs.

Sweeps fan out over ``(axis value, seed)`` jobs. Every job is a pure
function of its inputs, so results are identical for any worker count;
they are merged sorted by key.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
import pandas as pd

from glacier_da.core.errors import ModelError, ValidationError
from glacier_da.core.integrate import integrate
from glacier_da.core.models import (
    ERA_WINDOWS,
    ModelParams,
    SchemeSpec,
    TwinSetup,
    display_scale,
    to_display,
)
from glacier_da.core.osse import (
    Metrics,
    RunRecord,
    TruthRun,
    make_truth,
    mean_square_difference,
    run_setup,
)

log = logging.getLogger(__name__)

J = TypeVar("J")
R = TypeVar("R")

CATEGORY_PARAMS: dict[str, tuple[str, ...]] = {
    "smb": ("smb_o", "smb_1", "smb_f"),
    "initial": ("H_o", "L_o", "b_x"),
    "sill": ("sill_min", "sill_max", "sill_slope"),
}

BEST_ENSEMBLE_SIZE = 10
DEFAULT_SIZES = tuple(range(2, 76))
DEFAULT_SEEDS = tuple(range(10))
PROJECTION_TRUNCATE = 2022.0

# Reference projection of the assimilated model, display units (H km, L 100 km).
REFERENCE_PROJECTION: dict[float, tuple[float, float]] = {
    2000.0: (2.1672, 4.3532),
    2050.0: (2.028, 4.3028),
    2100.0: (2.0207, 4.1973),
    2150.0: (2.0442, 4.0063),
    2200.0: (2.0549, 3.845),
    2250.0: (2.0461, 3.7271),
    2300.0: (2.0219, 3.6438),
}


def run_jobs(fn: Callable[[J], R], jobs: Sequence[J], workers: int = 1) -> list[R]:
    """Apply ``fn`` to every job, in order, optionally in worker processes."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, jobs))


# ---------------------------------------------------------------------------
# Sensitivity


@dataclass(frozen=True)
class SensitivityCategory:
    """A group of parameters perturbed together by one common factor."""

    name: str
    params: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.name not in CATEGORY_PARAMS:
            raise ValidationError(
                f"category must be one of {tuple(CATEGORY_PARAMS)}, got '{self.name}'"
            )
        unknown = set(self.params) - set(CATEGORY_PARAMS[self.name])
        if not self.params or unknown:
            raise ValidationError(f"category '{self.name}' has no parameters {sorted(unknown)}")

    @classmethod
    def get(cls, name: str, single_slope: bool = False) -> SensitivityCategory:
        """Named category; ``single_slope`` keeps only ``b_x`` of ``initial``."""
        if single_slope:
            if name != "initial":
                raise ValidationError("single-slope mode applies to the 'initial' category")
            return cls(name="initial", params=("b_x",))
        if name not in CATEGORY_PARAMS:
            raise ValidationError(
                f"category must be one of {tuple(CATEGORY_PARAMS)}, got '{name}'"
            )
        return cls(name=name, params=CATEGORY_PARAMS[name])

    def scaled(self, p: ModelParams, factor: float) -> ModelParams:
        return dataclasses.replace(p, **{k: getattr(p, k) * factor for k in self.params})


@dataclass
class SensitivityResult:
    """Family of truth trajectories for one category.

    Attributes
    ----------
    category : SensitivityCategory
    frame : DataFrame
        Long format with columns ``t, sample_id, factor, H, L`` (SI).
    spread : DataFrame
        ``t, H_spread, L_spread``: max minus min over successful samples (SI).
    failed : list of tuple
        ``(sample_id, factor, reason)`` for samples that left the model domain.
    """

    category: SensitivityCategory
    frame: pd.DataFrame
    spread: pd.DataFrame
    failed: list[tuple[int, float, str]]

    def mean_spread(self) -> tuple[float, float]:
        """Time-averaged ``(H, L)`` spread, SI."""
        return float(self.spread["H_spread"].mean()), float(self.spread["L_spread"].mean())

    def to_csv_frame(self, display_units: bool = True) -> pd.DataFrame:
        out = self.frame.copy()
        if display_units:
            out["H"], out["L"] = to_display(out["H"], out["L"])
        return out


def sensitivity_sweep(
    p_base: ModelParams,
    category: SensitivityCategory,
    n_samples: int = 9,
    scale: float = 0.10,
    *,
    window: tuple[float, float] = (0.0, 2300.0),
    dt: float = 0.1,
) -> SensitivityResult:
    """Re-run the truth with the category scaled over ``[1 - scale, 1 + scale]``.

    Factors form a uniform grid of ``n_samples`` points; gamma and omega stay
    those of ``p_base``. Samples that raise a model or validation error are
    recorded as failed.
    """
    if n_samples < 2:
        raise ValidationError(f"n_samples must be >= 2, got {n_samples}")
    if not 0 <= scale < 1:
        raise ValidationError(f"scale must be in [0, 1), got {scale}")
    factors = np.linspace(1.0 - scale, 1.0 + scale, n_samples)

    frames = []
    failed: list[tuple[int, float, str]] = []
    for i, factor in enumerate(factors):
        try:
            p = category.scaled(p_base, float(factor))
            traj = integrate(window[0], window[1], p.initial_state(), p, dt=dt)
        except (ModelError, ValidationError) as exc:
            log.warning(
                "sensitivity %s sample %d (factor %.4f) failed: %s", category.name, i, factor, exc
            )
            failed.append((i, float(factor), str(exc)))
            continue
        frames.append(
            pd.DataFrame(
                {"t": traj.t, "sample_id": i, "factor": float(factor), "H": traj.H, "L": traj.L}
            )
        )
    if not frames:
        raise ModelError(f"every sensitivity sample of category '{category.name}' failed")

    frame = pd.concat(frames, ignore_index=True)
    grouped = frame.groupby("t", sort=True)
    spread = pd.DataFrame(
        {
            "t": grouped["H"].max().index.to_numpy(),
            "H_spread": (grouped["H"].max() - grouped["H"].min()).to_numpy(),
            "L_spread": (grouped["L"].max() - grouped["L"].min()).to_numpy(),
        }
    )
    log.info(
        "sensitivity %s: %d samples, %d failed", category.name, n_samples, len(failed)
    )
    return SensitivityResult(category=category, frame=frame, spread=spread, failed=failed)


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class SweepResult:
    """Median MSD over seeds at one sweep point (display units squared)."""

    axis: float
    msd_H: float
    msd_L: float
    seeds: int
    msd_H_iqr: float
    msd_L_iqr: float


SWEEP_COLUMNS = ["axis", "msd_H", "msd_L", "seeds", "msd_H_iqr", "msd_L_iqr"]


def sweep_frame(results: Iterable[SweepResult]) -> pd.DataFrame:
    """Rows of the ``sweep`` CSV schema."""
    rows = [dataclasses.astuple(r) for r in results]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS).astype({"seeds": int})


@dataclass(frozen=True)
class TwinJob:
    """One ``(axis value, seed)`` twin run to be scored."""

    axis: float
    seed: int
    setup: TwinSetup
    times: tuple[float, ...]
    score_window: tuple[float, float]
    truth: TruthRun


def score_job(job: TwinJob) -> tuple[float, int, Metrics]:
    record = run_setup(job.setup, job.times, truth=job.truth)
    return job.axis, job.seed, mean_square_difference(record, job.score_window)


def _summarise(scored: list[tuple[float, int, Metrics]]) -> list[SweepResult]:
    by_axis: dict[float, list[np.ndarray]] = {}
    for axis, _, metrics in sorted(scored, key=lambda r: (r[0], r[1])):
        by_axis.setdefault(axis, []).append(metrics.as_array())
    results = []
    for axis in sorted(by_axis):
        values = np.vstack(by_axis[axis])
        median = np.median(values, axis=0)
        q25, q75 = np.percentile(values, [25, 75], axis=0)
        iqr = q75 - q25
        results.append(
            SweepResult(
                axis=float(axis),
                msd_H=float(median[0]),
                msd_L=float(median[1]),
                seeds=len(values),
                msd_H_iqr=float(iqr[0]),
                msd_L_iqr=float(iqr[1]),
            )
        )
    return results


def ensemble_size_sweep(
    setup: TwinSetup,
    sizes: Sequence[int] = DEFAULT_SIZES,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    *,
    times: Sequence[float] | None = None,
    workers: int = 1,
) -> list[SweepResult]:
    """Median MSD over ``seeds`` for each ensemble size.

    Runs use the best observation schedule unless ``times`` is given, and
    are scored over the whole run window.
    """
    if any(n < 2 for n in sizes):
        raise ValidationError(f"ensemble sizes must be >= 2, got {list(sizes)}")
    if not seeds:
        raise ValidationError("at least one seed is required")
    obs_times = tuple(best_schedule(setup.window) if times is None else times)
    truth = make_truth(setup.p_true, setup.window, setup.dt)
    jobs = [
        TwinJob(
            axis=float(n),
            seed=int(seed),
            setup=setup.with_filter(N=int(n), seed=int(seed)),
            times=obs_times,
            score_window=setup.window,
            truth=truth,
        )
        for n in sizes
        for seed in seeds
    ]
    log.info("ensemble-size sweep: %d sizes x %d seeds", len(sizes), len(seeds))
    return _summarise(run_jobs(score_job, jobs, workers))


def scheme_times(era: str, interval: float, window: tuple[float, float]) -> tuple[float, ...]:
    """Regular observation times of an era, restricted to the run window."""
    spec = SchemeSpec.for_era(era, interval)
    return tuple(t for t in spec.times() if window[0] <= t <= window[1])


def scheme_sweep(
    setup: TwinSetup,
    era: str,
    intervals: Sequence[float],
    seeds: Sequence[int] = DEFAULT_SEEDS,
    *,
    workers: int = 1,
) -> list[SweepResult]:
    """Median in-era MSD for each observation interval.

    The run assimilates only inside the era and is scored only on the era
    window.
    """
    if era not in ERA_WINDOWS:
        raise ValidationError(f"era must be one of {tuple(ERA_WINDOWS)}, got '{era}'")
    if any(i < setup.dt for i in intervals):
        raise ValidationError(f"intervals must be >= dt={setup.dt}, got {list(intervals)}")
    if not seeds:
        raise ValidationError("at least one seed is required")
    lo, hi = ERA_WINDOWS[era]
    score_window = (max(lo, setup.window[0]), min(hi, setup.window[1]))
    truth = make_truth(setup.p_true, setup.window, setup.dt)
    jobs = [
        TwinJob(
            axis=float(interval),
            seed=int(seed),
            setup=setup.with_filter(seed=int(seed)),
            times=scheme_times(era, float(interval), setup.window),
            score_window=score_window,
            truth=truth,
        )
        for interval in intervals
        for seed in seeds
    ]
    log.info("scheme sweep %s: %d intervals x %d seeds", era, len(intervals), len(seeds))
    return _summarise(run_jobs(score_job, jobs, workers))


def plateau_entry(results: Sequence[SweepResult], band: float = 1.2) -> float | None:
    """First axis value whose median MSD is within ``band`` of the largest-axis value.

    Both components must be inside the band. Returns ``None`` for an empty
    sweep.
    """
    if not results:
        return None
    ordered = sorted(results, key=lambda r: r.axis)
    ref = ordered[-1]
    for r in ordered:
        if r.msd_H <= band * ref.msd_H and r.msd_L <= band * ref.msd_L:
            return r.axis
    return ref.axis


# ---------------------------------------------------------------------------
# Headline runs


def best_schedule(window: tuple[float, float] = (0.0, 2300.0)) -> tuple[float, ...]:
    """Every 19 years before 1900 and every year from 1950."""
    times = set(scheme_times("pre1900", 19.0, window)) | set(
        scheme_times("post1950", 1.0, window)
    )
    return tuple(sorted(times))


def worse_schedule(window: tuple[float, float] = (0.0, 2300.0)) -> tuple[float, ...]:
    """Every 200 years from year 200 to 1800, then every year from 2000 to 2300."""
    times = [float(t) for t in range(200, 2000, 200)] + [float(t) for t in range(2000, 2301)]
    return tuple(t for t in times if window[0] <= t <= window[1])


def no_assimilation_run(setup: TwinSetup) -> RunRecord:
    return run_setup(setup, ())


def best_run(setup: TwinSetup, *, keep_members: bool = False) -> RunRecord:
    """Composite best scheme with ten members."""
    return run_setup(
        setup.with_filter(N=BEST_ENSEMBLE_SIZE),
        best_schedule(setup.window),
        keep_members=keep_members,
    )


def worse_run(setup: TwinSetup, *, keep_members: bool = False) -> RunRecord:
    """Sparse early observations and late yearly ones with ten members."""
    return run_setup(
        setup.with_filter(N=BEST_ENSEMBLE_SIZE),
        worse_schedule(setup.window),
        keep_members=keep_members,
    )


def projection_run(
    setup: TwinSetup, truncate: float = PROJECTION_TRUNCATE, *, keep_members: bool = False
) -> RunRecord:
    """Best scheme with observations stopped at ``truncate``, free forecast after."""
    times = tuple(t for t in best_schedule(setup.window) if t <= truncate)
    record = run_setup(
        setup.with_filter(N=BEST_ENSEMBLE_SIZE), times, keep_members=keep_members
    )
    log.info(
        "projection: %d analyses up to %s, forecast to %s",
        record.n_analyses,
        truncate,
        setup.window[1],
    )
    return record


def decadal_checkpoints(record: RunRecord, start: float = 0.0, step: float = 10.0) -> pd.DataFrame:
    """Truth, forecast and analysis means (display units) every ``step`` years."""
    t = record.t
    on_grid = np.isclose((t - start) % step, 0.0, atol=1e-6) | np.isclose(
        (t - start) % step, step, atol=1e-6
    )
    rows = record.frame.loc[on_grid & (t >= start - 1e-9)]
    scale = display_scale()
    return pd.DataFrame(
        {
            "t": rows["t"].to_numpy(),
            "H_truth": rows["H_truth"].to_numpy() / scale[0],
            "L_truth": rows["L_truth"].to_numpy() / scale[1],
            "H_forecast": rows["H_forecast"].to_numpy() / scale[0],
            "L_forecast": rows["L_forecast"].to_numpy() / scale[1],
            "H_analysis": rows["H_analysis"].to_numpy() / scale[0],
            "L_analysis": rows["L_analysis"].to_numpy() / scale[1],
        }
    )


def projection_table(record: RunRecord) -> pd.DataFrame:
    """Truth and projection next to the reference projection values.

    One row per reference year inside the record, display units, with
    offsets ``projection - reference``, ``truth - reference`` and
    ``projection - truth`` per component.
    """
    rows = []
    t_max = float(record.t[-1])
    for year, (H_ref, L_ref) in REFERENCE_PROJECTION.items():
        if year > t_max + 1e-9 or year < float(record.t[0]) - 1e-9:
            continue
        row = record.row(year)
        H_true, L_true = to_display(row["H_truth"], row["L_truth"])
        H_proj, L_proj = to_display(row["H_analysis"], row["L_analysis"])
        rows.append(
            {
                "t": year,
                "H_truth": H_true,
                "H_projection": H_proj,
                "H_reference": H_ref,
                "L_truth": L_true,
                "L_projection": L_proj,
                "L_reference": L_ref,
                "H_projection_minus_reference": H_proj - H_ref,
                "H_truth_minus_reference": H_true - H_ref,
                "H_projection_minus_truth": H_proj - H_true,
                "L_projection_minus_reference": L_proj - L_ref,
                "L_truth_minus_reference": L_true - L_ref,
                "L_projection_minus_truth": L_proj - L_true,
            }
        )
    return pd.DataFrame(rows)


@dataclass(frozen=True)
class ProjectionCheck:
    """Final-year comparison of a projection with the reference values.

    ``inherited_from_truth`` is true when the projection tracks the truth
    within tolerance but the truth itself sits outside it, i.e. the offset
    comes from the model configuration and not from the filter.
    """

    year: float
    within_tolerance: bool
    inherited_from_truth: bool
    rel_offset_H: float
    rel_offset_L: float


def projection_check(record: RunRecord, tol: float = 0.10) -> ProjectionCheck:
    table = projection_table(record)
    if table.empty:
        raise ValidationError("record does not reach any reference projection year")
    last = table.iloc[-1]
    rel_H = abs(last["H_projection_minus_reference"]) / last["H_reference"]
    rel_L = abs(last["L_projection_minus_reference"]) / last["L_reference"]
    within = bool(rel_H <= tol and rel_L <= tol)
    tracks_truth = bool(
        abs(last["H_projection_minus_truth"]) <= tol * abs(last["H_truth"])
        and abs(last["L_projection_minus_truth"]) <= tol * abs(last["L_truth"])
    )
    truth_off = bool(
        abs(last["H_truth_minus_reference"]) > tol * last["H_reference"]
        or abs(last["L_truth_minus_reference"]) > tol * last["L_reference"]
    )
    if not within:
        log.warning(
            "projection at %s is %.1f%% (H) / %.1f%% (L) from the reference values",
            last["t"],
            100 * rel_H,
            100 * rel_L,
        )
    return ProjectionCheck(
        year=float(last["t"]),
        within_tolerance=within,
        inherited_from_truth=tracks_truth and truth_off,
        rel_offset_H=float(rel_H),
        rel_offset_L=float(rel_L),
    )


@dataclass(frozen=True)
class EraError:
    """Relative RMS error ``sqrt(MSD) / mean(truth)`` per component over a window."""

    rel_H: float
    rel_L: float
    window: tuple[float, float]

    def meets_threshold(self, threshold: float = 0.05) -> bool:
        return self.rel_H < threshold and self.rel_L < threshold


def era_relative_error(record: RunRecord, window: tuple[float, float]) -> EraError:
    metrics = mean_square_difference(record, window)
    t = record.t
    mask = (t >= window[0] - 1e-9) & (t <= window[1] + 1e-9)
    mean_truth = record.truth()[mask].mean(axis=0) / display_scale()
    rel = np.sqrt(metrics.as_array()) / mean_truth
    return EraError(rel_H=float(rel[0]), rel_L=float(rel[1]), window=metrics.window)
