"""Deterministic CSV, manifest and resolved-config output.

Files are written to a temporary sibling and renamed into place. CSVs use
``\\n`` line endings, ``.`` decimals and 17 significant digits, so the same
inputs always give the same bytes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import pandas as pd

from glacier_da.core.errors import ValidationError
from glacier_da.core.experiments import SWEEP_COLUMNS
from glacier_da.core.osse import RUNRECORD_COLUMNS
from glacier_da.core.slr import SLR_COLUMNS
from glacier_da.io.loaders import ATTR_ALIASES, RunConfig

SCHEMAS: dict[str, list[str]] = {
    "runrecord": RUNRECORD_COLUMNS,
    "sweep": SWEEP_COLUMNS,
    "sensitivity": ["t", "sample_id", "factor", "H", "L"],
    "slr": SLR_COLUMNS,
}

MANIFEST_NAME = "manifest.json"
RESOLVED_CONFIG_NAME = "resolved-config.cfg"


@dataclass(frozen=True)
class CsvArtifact:
    """A CSV file written under one of the known schemas."""

    path: Path
    schema: str
    columns: tuple[str, ...]
    rows: int
    sha256: str

    def __post_init__(self) -> None:
        if self.schema not in SCHEMAS:
            raise ValidationError(f"schema must be one of {tuple(SCHEMAS)}, got '{self.schema}'")
        if list(self.columns) != SCHEMAS[self.schema]:
            raise ValidationError(
                f"columns {list(self.columns)} do not match schema '{self.schema}'"
            )


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _replace_atomic(path: Path, write: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        write(tmp)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def write_text_atomic(path: str | Path, text: str) -> Path:
    path = Path(path)
    _replace_atomic(path, lambda p: p.write_bytes(text.encode("utf-8")))
    return path


def emit_csv(frame: pd.DataFrame, schema: str, path: str | Path) -> CsvArtifact:
    """Write ``frame`` as a CSV of the given schema.

    Parameters
    ----------
    frame : DataFrame
        Must hold exactly the schema's columns (extra columns are dropped,
        missing ones are an error). NaN is written as an empty field.
    schema : str
        One of ``runrecord``, ``sweep``, ``sensitivity``, ``slr``.
    path : str or Path
        Destination file.

    Returns
    -------
    CsvArtifact
    """
    if schema not in SCHEMAS:
        raise ValidationError(f"schema must be one of {tuple(SCHEMAS)}, got '{schema}'")
    columns = SCHEMAS[schema]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ValidationError(f"frame lacks columns {missing} of schema '{schema}'")
    path = Path(path)
    data = frame[columns]
    _replace_atomic(
        path,
        lambda p: data.to_csv(
            p, index=False, float_format="%.17g", lineterminator="\n", na_rep="", encoding="utf-8"
        ),
    )
    return CsvArtifact(
        path=path,
        schema=schema,
        columns=tuple(columns),
        rows=len(data),
        sha256=file_digest(path),
    )


def write_manifest(
    out_dir: str | Path,
    command: str,
    artifacts: Iterable[CsvArtifact],
    *,
    config_path: str | Path | None = None,
    extra_files: Iterable[str | Path] = (),
) -> Path:
    """Write ``manifest.json`` listing every output with its SHA-256.

    Paths are stored relative to ``out_dir`` and nothing time-dependent is
    recorded, so a rerun reproduces the manifest byte for byte.
    """
    out_dir = Path(out_dir)

    def rel(p: str | Path) -> str:
        p = Path(p)
        try:
            return p.relative_to(out_dir).as_posix()
        except ValueError:
            return p.as_posix()

    manifest: dict[str, Any] = {
        "command": command,
        "artifacts": [
            {
                "path": rel(a.path),
                "schema": a.schema,
                "columns": list(a.columns),
                "rows": a.rows,
                "sha256": a.sha256,
            }
            for a in sorted(artifacts, key=lambda a: rel(a.path))
        ],
        "files": [
            {"path": rel(f), "sha256": file_digest(f)}
            for f in sorted(extra_files, key=lambda f: rel(f))
        ],
    }
    if config_path is not None:
        manifest["config"] = {"path": rel(config_path), "sha256": file_digest(config_path)}
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    return write_text_atomic(out_dir / MANIFEST_NAME, text)


def _format_value(v: Any) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    raise TypeError(f"cannot format config value {v!r}")


def _section_lines(name: str, values: dict[str, Any]) -> list[str]:
    lines = [f"[{name}]"]
    lines += [f"{k} = {_format_value(v)}" for k, v in values.items()]
    return lines + [""]


def emit_config(cfg: RunConfig, *, include_out: bool = True) -> str:
    """Render ``cfg`` in the ``key = value`` grammar.

    Every key is present unless ``include_out`` is false, which drops
    ``run.out`` so the text does not depend on where a run was written.
    """

    def params(p: Any) -> dict[str, Any]:
        return {ATTR_ALIASES.get(k, k): v for k, v in dataclasses.asdict(p).items()}

    filter_values = dataclasses.asdict(cfg.filter)
    filter_values.pop("seed")
    filter_values["spread"] = cfg.spread

    lines: list[str] = ["# glacier-da resolved configuration", ""]
    lines += _section_lines("true", params(cfg.true))
    lines += _section_lines("inaccurate", params(cfg.inaccurate))
    lines += _section_lines("filter", filter_values)
    lines += _section_lines("schedule", dataclasses.asdict(cfg.schedule))
    run_values = dataclasses.asdict(cfg.run)
    if not include_out:
        run_values.pop("out")
    lines += _section_lines("run", run_values)
    return "\n".join(lines)


def write_resolved_config(cfg: RunConfig, out_dir: str | Path) -> Path:
    text = emit_config(cfg, include_out=False)
    return write_text_atomic(Path(out_dir) / RESOLVED_CONFIG_NAME, text)
