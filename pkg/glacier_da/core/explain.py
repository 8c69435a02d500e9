"""Markdown run summaries."""

from __future__ import annotations

from typing import Mapping, Sequence

import pandas as pd

from glacier_da.core.experiments import EraError, ProjectionCheck, SweepResult, plateau_entry
from glacier_da.core.osse import Metrics
from glacier_da.core.slr import RegionalEstimate, SlrSeries

SIGN_NOTE = (
    "Volumes follow W (Q - Q_g): a retreating glacier (Q < Q_g) gives a negative "
    "value. The magnitude column is the sea-level contribution."
)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _table(frame: pd.DataFrame) -> list[str]:
    cols = list(frame.columns)
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for _, row in frame.iterrows():
        cells = [_fmt(v) if isinstance(v, float) else str(v) for v in row]
        lines.append("| " + " | ".join(cells) + " |")
    return lines


def build_run_report(
    title: str,
    *,
    metrics: Mapping[str, Metrics] | None = None,
    analyses: Mapping[str, int] | None = None,
    era_errors: Mapping[str, EraError] | None = None,
    sweep: list[SweepResult] | None = None,
    projection: pd.DataFrame | None = None,
    projection_check: ProjectionCheck | None = None,
    slr: Mapping[float, SlrSeries] | None = None,
    regional: Sequence[RegionalEstimate] = (),
    notes: Sequence[str] = (),
) -> str:
    """Render a markdown summary of whatever parts of a run are given.

    Parameters
    ----------
    title : str
        Heading, usually the subcommand name.
    metrics : mapping of str to Metrics, optional
        Mean square differences per named run.
    analyses : mapping of str to int, optional
        Number of analysis steps per named run.
    era_errors : mapping of str to EraError, optional
        Relative RMS errors against the 5% criterion.
    sweep : list of SweepResult, optional
        Sweep rows; the plateau entry is reported alongside.
    projection : DataFrame, optional
        Output of ``experiments.projection_table``.
    projection_check : ProjectionCheck, optional
        Final-year tolerance check of the projection.
    slr : mapping of float to SlrSeries, optional
        Width study keyed by width in km.
    regional : sequence of RegionalEstimate
        Regional scaling per width.
    notes : sequence of str
        Free-form bullet points listed first.

    Returns
    -------
    str
        Markdown text ending in a newline.
    """
    lines: list[str] = [f"# {title}", ""]
    if notes:
        lines += [f"- {note}" for note in notes] + [""]

    if metrics:
        lines += ["## Mean square difference (display units^2)", ""]
        lines += ["| run | msd_H | msd_L | window | analyses |", "|---|---|---|---|---|"]
        for name, m in metrics.items():
            n = analyses.get(name, "") if analyses else ""
            lines.append(
                f"| {name} | {_fmt(m.msd_H)} | {_fmt(m.msd_L)} | "
                f"{m.window[0]:g}-{m.window[1]:g} | {n} |"
            )
        lines.append("")

    if era_errors:
        lines += ["## Relative RMS error", ""]
        for name, e in era_errors.items():
            verdict = "under 5%" if e.meets_threshold() else "not under 5%"
            lines.append(
                f"- {name} ({e.window[0]:g}-{e.window[1]:g}): H {e.rel_H:.2%}, "
                f"L {e.rel_L:.2%}, {verdict}"
            )
        lines.append("")

    if sweep:
        lines += ["## Sweep", ""]
        lines += _table(pd.DataFrame([vars(r) for r in sweep]))
        lines.append("")
        entry = plateau_entry(sweep)
        if entry is not None:
            lines += [f"Plateau entry (median MSD within 1.2x of the last point): {entry:g}", ""]

    if projection is not None and not projection.empty:
        lines += ["## Projection", ""]
        cols = ["t", "H_truth", "H_projection", "H_reference", "L_truth", "L_projection"]
        lines += _table(projection[cols + ["L_reference"]])
        lines.append("")
        lines += _table(
            projection[
                [
                    "t",
                    "H_projection_minus_reference",
                    "H_truth_minus_reference",
                    "H_projection_minus_truth",
                    "L_projection_minus_reference",
                    "L_truth_minus_reference",
                    "L_projection_minus_truth",
                ]
            ]
        )
        lines.append("")
    if projection_check is not None:
        c = projection_check
        lines.append(
            f"Projection at {c.year:g}: H off by {c.rel_offset_H:.1%}, "
            f"L off by {c.rel_offset_L:.1%} from the reference values."
        )
        if c.within_tolerance:
            lines.append("Both components are within 10%.")
        elif c.inherited_from_truth:
            lines.append(
                "The offset is inherited from the truth run: the projection tracks the "
                "truth within 10% while the truth itself differs from the reference."
            )
        else:
            lines.append("The projection does not track the truth within 10%.")
        lines.append("")

    if slr:
        lines += ["## Sea level by width", ""]
        lines += ["| width_km | Vcum_km3 | slr_mm | slr_mm_magnitude |", "|---|---|---|---|"]
        for w, s in sorted(slr.items()):
            lines.append(
                f"| {w:g} | {_fmt(s.final_km3())} | {_fmt(s.final_mm())} | "
                f"{_fmt(abs(s.final_mm()))} |"
            )
        lines += ["", SIGN_NOTE, ""]

    if regional:
        lines += ["## Regional estimate", ""]
        for r in regional:
            lines.append(
                f"- {r.glacier_count} glaciers of width {r.width_km:g} km: "
                f"{_fmt(r.mm)} mm ({_fmt(r.per_glacier_mm)} mm per glacier)"
            )
        lines += ["", f"Caveat: {regional[0].caveat}", ""]

    return "\n".join(lines).rstrip("\n") + "\n"
