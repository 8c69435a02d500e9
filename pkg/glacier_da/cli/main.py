"""CLI entry point for glacier-da."""

from __future__ import annotations

import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import click

from glacier_da import __version__
from glacier_da.core.errors import GlacierDAError, ValidationError
from glacier_da.core.experiments import (
    SensitivityCategory,
    ensemble_size_sweep,
    era_relative_error,
    projection_check,
    projection_run,
    projection_table,
    scheme_sweep,
    sensitivity_sweep,
    sweep_frame,
)
from glacier_da.core.explain import build_run_report
from glacier_da.core.models import ERA_WINDOWS, to_display
from glacier_da.core.osse import make_truth, mean_square_difference, run_setup
from glacier_da.core.slr import regional_estimate, width_study
from glacier_da.io.loaders import RunConfig, load_config
from glacier_da.io.writers import (
    CsvArtifact,
    emit_csv,
    write_manifest,
    write_resolved_config,
    write_text_atomic,
)

log = logging.getLogger(__name__)

LOG_LEVEL_ENV = "GLACIER_DA_LOG_LEVEL"


def _configure_logging() -> None:
    level_name = os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@dataclass
class CommandOutput:
    """What a subcommand produced before the shared bookkeeping files."""

    artifacts: list[CsvArtifact] = field(default_factory=list)
    report: str = ""
    figures: list[Path] = field(default_factory=list)


def _truth(cfg: RunConfig, out: Path) -> CommandOutput:
    setup = cfg.twin_setup()
    truth = make_truth(setup.p_true, setup.window, setup.dt)
    artifact = emit_csv(
        truth.to_csv_frame(cfg.run.display_units), "runrecord", out / "truth.csv"
    )
    H_end, L_end = to_display(truth.trajectory.H[-1], truth.trajectory.L[-1])
    report = build_run_report(
        "truth",
        notes=[
            f"window {setup.window[0]:g}-{setup.window[1]:g}, dt {setup.dt:g}, "
            f"{len(truth.t)} records",
            f"final state: H {H_end:.6g} km, L {L_end:.6g} x 100 km",
            f"gamma {setup.p_true.gamma:.6g}, omega {setup.p_true.omega:.6g}",
        ],
    )
    figures: list[Path] = []
    if cfg.run.plots:
        from glacier_da.viz.charts import plot_trajectory

        figures.append(out / "truth.svg")
        plot_trajectory(truth.trajectory, save_path=figures[-1])
    return CommandOutput([artifact], report, figures)


def _assimilate(cfg: RunConfig, out: Path) -> CommandOutput:
    setup = cfg.twin_setup()
    record = run_setup(setup, cfg.observation_times())
    artifact = emit_csv(
        record.to_csv_frame(cfg.run.display_units), "runrecord", out / "runrecord.csv"
    )
    metrics = {"assimilation": mean_square_difference(record)}
    era_errors = {}
    for era, (lo, hi) in ERA_WINDOWS.items():
        window = (max(lo, setup.window[0]), min(hi, setup.window[1]))
        if window[0] < window[1]:
            metrics[era] = mean_square_difference(record, window)
            era_errors[era] = era_relative_error(record, window)
    report = build_run_report(
        "assimilate",
        notes=[f"schedule '{cfg.schedule.era}', N={setup.filter.N}, seed={setup.filter.seed}"],
        metrics=metrics,
        analyses={"assimilation": record.n_analyses},
        era_errors=era_errors,
    )
    figures: list[Path] = []
    if cfg.run.plots:
        from glacier_da.viz.charts import plot_twin_run

        figures.append(out / "runrecord.svg")
        plot_twin_run(record, title=f"Twin run ({cfg.schedule.era})", save_path=figures[-1])
    return CommandOutput([artifact], report, figures)


def _sweep_ensemble(cfg: RunConfig, out: Path) -> CommandOutput:
    results = ensemble_size_sweep(
        cfg.twin_setup(),
        cfg.run.sizes,
        cfg.run.seeds,
        times=cfg.observation_times(),
        workers=cfg.run.workers,
    )
    artifact = emit_csv(sweep_frame(results), "sweep", out / "sweep_ensemble.csv")
    report = build_run_report("sweep-ensemble", sweep=results)
    figures: list[Path] = []
    if cfg.run.plots:
        from glacier_da.viz.charts import plot_sweep

        figures.append(out / "sweep_ensemble.svg")
        plot_sweep(results, xlabel="Ensemble size", save_path=figures[-1])
    return CommandOutput([artifact], report, figures)


def _sweep_scheme(cfg: RunConfig, out: Path) -> CommandOutput:
    era = cfg.run.sweep_era
    results = scheme_sweep(
        cfg.twin_setup(), era, cfg.run.intervals, cfg.run.seeds, workers=cfg.run.workers
    )
    artifact = emit_csv(sweep_frame(results), "sweep", out / f"sweep_scheme_{era}.csv")
    report = build_run_report(f"sweep-scheme ({era})", sweep=results)
    figures: list[Path] = []
    if cfg.run.plots:
        from glacier_da.viz.charts import plot_sweep

        figures.append(out / f"sweep_scheme_{era}.svg")
        plot_sweep(results, xlabel="Observation interval (years)", save_path=figures[-1])
    return CommandOutput([artifact], report, figures)


def _sensitivity(cfg: RunConfig, out: Path) -> CommandOutput:
    setup = cfg.twin_setup()
    category = SensitivityCategory.get(cfg.run.category, single_slope=cfg.run.single_slope)
    result = sensitivity_sweep(
        setup.p_true,
        category,
        cfg.run.n_samples,
        cfg.run.scale,
        window=setup.window,
        dt=setup.dt,
    )
    name = f"sensitivity_{category.name}" + ("_slope" if cfg.run.single_slope else "")
    artifact = emit_csv(
        result.to_csv_frame(cfg.run.display_units), "sensitivity", out / f"{name}.csv"
    )
    H_spread, L_spread = to_display(*result.mean_spread())
    notes = [
        f"category {category.name}: {', '.join(category.params)} scaled by "
        f"[{1 - cfg.run.scale:g}, {1 + cfg.run.scale:g}] over {cfg.run.n_samples} samples",
        f"time-averaged spread: H {H_spread:.6g} km, L {L_spread:.6g} x 100 km",
        f"failed samples: {len(result.failed)}",
    ]
    notes += [f"sample {i} (factor {f:.4f}): {reason}" for i, f, reason in result.failed]
    report = build_run_report("sensitivity", notes=notes)
    figures: list[Path] = []
    if cfg.run.plots:
        from glacier_da.viz.charts import plot_sensitivity

        figures.append(out / f"{name}.svg")
        plot_sensitivity(result, save_path=figures[-1])
    return CommandOutput([artifact], report, figures)


def _project(cfg: RunConfig, out: Path) -> CommandOutput:
    setup = cfg.twin_setup()
    record = projection_run(setup, cfg.run.truncate)
    artifact = emit_csv(
        record.to_csv_frame(cfg.run.display_units), "runrecord", out / "projection.csv"
    )
    table = projection_table(record)
    check = projection_check(record) if not table.empty else None
    report = build_run_report(
        "project",
        notes=[f"observations stop at {cfg.run.truncate:g}; {record.n_analyses} analyses"],
        metrics={"projection": mean_square_difference(record)},
        analyses={"projection": record.n_analyses},
        projection=table,
        projection_check=check,
    )
    figures: list[Path] = []
    if cfg.run.plots:
        from glacier_da.viz.charts import plot_twin_run

        figures.append(out / "projection.svg")
        plot_twin_run(record, title="Projection", save_path=figures[-1])
    return CommandOutput([artifact], report, figures)


def _slr(cfg: RunConfig, out: Path) -> CommandOutput:
    record = projection_run(cfg.twin_setup(), cfg.run.truncate)
    study = width_study(record, cfg.run.widths)
    artifacts = [
        emit_csv(series.frame, "slr", out / f"slr_{w:g}km.csv") for w, series in study.items()
    ]
    regional = [regional_estimate(s, cfg.run.glacier_count) for _, s in sorted(study.items())]
    report = build_run_report(
        "slr",
        notes=[
            f"analysis-mean fluxes of the projection run (observations to {cfg.run.truncate:g})"
        ],
        slr=study,
        regional=regional,
    )
    figures: list[Path] = []
    if cfg.run.plots:
        from glacier_da.viz.charts import plot_slr

        for w, series in sorted(study.items()):
            figures.append(out / f"slr_{w:g}km.svg")
            plot_slr(series, save_path=figures[-1])
    return CommandOutput(artifacts, report, figures)


_HANDLERS: dict[str, Callable[[RunConfig, Path], CommandOutput]] = {
    "truth": _truth,
    "assimilate": _assimilate,
    "sweep-ensemble": _sweep_ensemble,
    "sweep-scheme": _sweep_scheme,
    "sensitivity": _sensitivity,
    "project": _project,
    "slr": _slr,
}


def run_subcommand(name: str, cfg: RunConfig) -> list[CsvArtifact]:
    """Run one subcommand and write its outputs under ``cfg.run.out``.

    Besides the CSVs, the output directory receives ``resolved-config.cfg``,
    ``summary.md``, any figures and ``manifest.json``.
    """
    if name not in _HANDLERS:
        raise ValidationError(
            f"unknown subcommand '{name}', expected one of {tuple(_HANDLERS)}"
        )
    out = Path(cfg.run.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("%s: writing to %s", name, out)
    config_path = write_resolved_config(cfg, out)
    result = _HANDLERS[name](cfg, out)
    summary = write_text_atomic(out / "summary.md", result.report)
    write_manifest(
        out,
        name,
        result.artifacts,
        config_path=config_path,
        extra_files=[summary, *result.figures],
    )
    return result.artifacts


def _fail(exc: GlacierDAError) -> None:
    payload = {"type": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    click.echo(f"error: {json.dumps(payload, sort_keys=True)}", err=True)
    sys.exit(exc.exit_code)


def _common_options(fn: Callable[..., Any]) -> Callable[..., Any]:
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(exists=True, dir_okay=False),
            default=None,
            help="Configuration file (key = value, YAML or JSON); defaults apply if omitted",
        ),
        click.option("--seed", type=click.IntRange(min=0), default=None, help="Root seed"),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None),
        click.option("--dt", type=float, default=None, help="Model step in years"),
        click.option("--workers", type=click.IntRange(min=1), default=None),
        click.option("--plot", is_flag=True, default=False, help="Render SVG figures"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _invoke(
    name: str,
    config_path: str | None,
    seed: int | None,
    out_dir: str | None,
    dt: float | None,
    workers: int | None,
    plot: bool,
) -> None:
    try:
        cfg = load_config(config_path) if config_path else RunConfig()
        cfg = cfg.with_overrides(
            seed=seed, dt=dt, out=out_dir, workers=workers, plots=True if plot else None
        )
        artifacts = run_subcommand(name, cfg)
    except GlacierDAError as exc:
        _fail(exc)
        return
    for artifact in artifacts:
        click.echo(f"{artifact.schema}: {artifact.path} ({artifact.rows} rows)")
    click.echo(f"Results written to {cfg.run.out}")


@click.group()
@click.version_option(__version__, prog_name="glacier-da")
def cli() -> None:
    """glacier-da: two-stage glacier model, EnKF twin experiments and sea level."""
    _configure_logging()


@cli.command()
@_common_options
def truth(
    config_path: str | None,
    seed: int | None,
    out_dir: str | None,
    dt: float | None,
    workers: int | None,
    plot: bool,
) -> None:
    """Integrate the true model and write its run record."""
    _invoke("truth", config_path, seed, out_dir, dt, workers, plot)


@cli.command()
@_common_options
def assimilate(
    config_path: str | None,
    seed: int | None,
    out_dir: str | None,
    dt: float | None,
    workers: int | None,
    plot: bool,
) -> None:
    """Run one twin experiment with the configured schedule.

    The truth comes from the [true] parameters, the filter runs the
    [inaccurate] model from its own initial state, and observations follow
    the [schedule] section. Output: runrecord.csv and summary.md.
    """
    _invoke("assimilate", config_path, seed, out_dir, dt, workers, plot)


@cli.command("sweep-ensemble")
@_common_options
def sweep_ensemble(
    config_path: str | None,
    seed: int | None,
    out_dir: str | None,
    dt: float | None,
    workers: int | None,
    plot: bool,
) -> None:
    """Median MSD over seeds for each ensemble size."""
    _invoke("sweep-ensemble", config_path, seed, out_dir, dt, workers, plot)


@cli.command("sweep-scheme")
@_common_options
def sweep_scheme(
    config_path: str | None,
    seed: int | None,
    out_dir: str | None,
    dt: float | None,
    workers: int | None,
    plot: bool,
) -> None:
    """Median in-era MSD over seeds for each observation interval."""
    _invoke("sweep-scheme", config_path, seed, out_dir, dt, workers, plot)


@cli.command()
@_common_options
def sensitivity(
    config_path: str | None,
    seed: int | None,
    out_dir: str | None,
    dt: float | None,
    workers: int | None,
    plot: bool,
) -> None:
    """Scale one parameter category by +/- scale and re-run the truth."""
    _invoke("sensitivity", config_path, seed, out_dir, dt, workers, plot)


@cli.command()
@_common_options
def project(
    config_path: str | None,
    seed: int | None,
    out_dir: str | None,
    dt: float | None,
    workers: int | None,
    plot: bool,
) -> None:
    """Assimilate until the truncation year, then forecast freely to the run end."""
    _invoke("project", config_path, seed, out_dir, dt, workers, plot)


@cli.command()
@_common_options
def slr(
    config_path: str | None,
    seed: int | None,
    out_dir: str | None,
    dt: float | None,
    workers: int | None,
    plot: bool,
) -> None:
    """Sea-level contribution of the projection run for each width."""
    _invoke("slr", config_path, seed, out_dir, dt, workers, plot)
