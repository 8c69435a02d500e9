"""Run configuration loading and artifact reading.

Two equivalent input forms produce a ``RunConfig``:

- the line-oriented ``key = value`` grammar, one assignment per line, ``#``
  comments and ``[true]``, ``[inaccurate]``, ``[filter]``, ``[schedule]``,
  ``[run]`` sections. Each value is typed with ``yaml.safe_load``, so
  ``0.3``, ``true``, ``[2, 5, 10]`` and ``[[0, 0], [0, 0]]`` all work, and
  ``2..75`` is an inclusive integer range;
- a YAML or JSON mapping of section name to key/value mapping.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import pandas as pd
import yaml

from glacier_da.core.dynamics import calibrate_constants, with_constants
from glacier_da.core.errors import ConfigParseError, ValidationError
from glacier_da.core.experiments import (
    CATEGORY_PARAMS,
    DEFAULT_SEEDS,
    DEFAULT_SIZES,
    PROJECTION_TRUNCATE,
    best_schedule,
    scheme_times,
    worse_schedule,
)
from glacier_da.core.models import (
    ERA_WINDOWS,
    FilterConfig,
    ModelParams,
    SchemeSpec,
    TwinSetup,
    inaccurate_params,
    twin_filter,
)
from glacier_da.core.slr import DEFAULT_WIDTHS_KM, GREENLAND_GLACIER_COUNT

SCHEDULE_ERAS = ("pre1900", "post1950", "composite", "custom", "worse", "none")
SECTIONS = ("true", "inaccurate", "filter", "schedule", "run")

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*\]$")
_ASSIGN_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_RANGE_RE = re.compile(r"^(-?\d+)\s*\.\.\s*(-?\d+)$")
# Longest prefix free of comments; quoted strings may contain "#".
_CODE_RE = re.compile(r"""(?:[^#"']|"(?:\\.|[^"\\])*"|'[^']*')*""")


@dataclass(frozen=True)
class ScheduleConfig:
    """Which observation times a run uses and how noisy they are.

    ``era`` selects the times: ``pre1900``/``post1950`` are regular schemes
    at ``interval``, ``composite`` and ``worse`` are the headline schedules,
    ``none`` observes nothing and ``custom`` uses ``times`` or, when empty,
    ``[start, end)`` at ``interval``.
    """

    era: str = "composite"
    interval: float = 1.0
    start: float = 0.0
    end: float = 2300.0
    times: tuple[float, ...] = ()
    rel_noise: tuple[float, ...] = (0.01, 0.01)
    abs_floor: tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.era not in SCHEDULE_ERAS:
            raise ValidationError(f"schedule era must be one of {SCHEDULE_ERAS}, got '{self.era}'")
        if not self.interval > 0:
            raise ValidationError(f"schedule interval must be > 0, got {self.interval}")
        if not self.start < self.end:
            raise ValidationError(f"schedule start must be < end, got {self.start}, {self.end}")
        if any(r < 0 for r in self.rel_noise) or any(f < 0 for f in self.abs_floor):
            raise ValidationError("rel_noise and abs_floor must be >= 0")
        if len(self.rel_noise) != 2 or len(self.abs_floor) != 2:
            raise ValidationError("rel_noise and abs_floor need one value each for H and L")

    def resolve_times(self, window: tuple[float, float]) -> tuple[float, ...]:
        """Observation years inside ``window``."""
        if self.era == "none":
            return ()
        if self.era == "composite":
            return best_schedule(window)
        if self.era == "worse":
            return worse_schedule(window)
        if self.era in ERA_WINDOWS:
            return scheme_times(self.era, self.interval, window)
        if self.times:
            times = tuple(sorted(self.times))
        else:
            times = SchemeSpec("custom", self.interval, self.start, self.end).times()
        return tuple(t for t in times if window[0] <= t <= window[1])


@dataclass(frozen=True)
class RunSettings:
    """Window, seeding, output and per-subcommand knobs."""

    t0: float = 0.0
    t1: float = 2300.0
    dt: float = 0.1
    seed: int = 0
    out: str = "out"
    display_units: bool = True
    workers: int = 1
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    sizes: tuple[int, ...] = DEFAULT_SIZES
    intervals: tuple[float, ...] = (1.0, 5.0, 10.0, 19.0, 25.0, 50.0)
    sweep_era: str = "post1950"
    category: str = "sill"
    n_samples: int = 9
    scale: float = 0.1
    single_slope: bool = False
    widths: tuple[float, ...] = DEFAULT_WIDTHS_KM
    glacier_count: int = GREENLAND_GLACIER_COUNT
    truncate: float = PROJECTION_TRUNCATE
    plots: bool = False

    def __post_init__(self) -> None:
        if not self.t0 <= self.t1:
            raise ValidationError(f"run window must satisfy t0 <= t1, got {self.t0}, {self.t1}")
        if not self.dt > 0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        if not self.seeds:
            raise ValidationError("seeds must not be empty")
        if any(n < 2 for n in self.sizes):
            raise ValidationError(f"ensemble sizes must be >= 2, got {list(self.sizes)}")
        if any(i < self.dt for i in self.intervals):
            raise ValidationError(f"intervals must be >= dt={self.dt}")
        if self.sweep_era not in ERA_WINDOWS:
            raise ValidationError(
                f"sweep_era must be one of {tuple(ERA_WINDOWS)}, got '{self.sweep_era}'"
            )
        if self.category not in CATEGORY_PARAMS:
            raise ValidationError(
                f"category must be one of {tuple(CATEGORY_PARAMS)}, got '{self.category}'"
            )
        if self.n_samples < 2:
            raise ValidationError(f"n_samples must be >= 2, got {self.n_samples}")
        if not 0 <= self.scale < 1:
            raise ValidationError(f"scale must be in [0, 1), got {self.scale}")
        if any(w <= 0 for w in self.widths):
            raise ValidationError(f"widths must be > 0, got {list(self.widths)}")
        if self.glacier_count < 1:
            raise ValidationError(f"glacier_count must be >= 1, got {self.glacier_count}")


@dataclass(frozen=True)
class RunConfig:
    """Fully validated configuration of one CLI invocation.

    ``true`` and ``inaccurate`` may leave gamma and omega unset; the twin
    setup then calibrates them on the true parameters and shares them.
    """

    true: ModelParams = field(default_factory=ModelParams)
    inaccurate: ModelParams = field(default_factory=inaccurate_params)
    filter: FilterConfig = field(default_factory=twin_filter)
    spread: float = 0.02
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def __post_init__(self) -> None:
        if self.spread < 0:
            raise ValidationError(f"spread must be >= 0, got {self.spread}")
        if self.filter.seed != self.run.seed:
            raise ValidationError("filter seed must equal the run seed")

    @property
    def window(self) -> tuple[float, float]:
        return (self.run.t0, self.run.t1)

    def twin_setup(self) -> TwinSetup:
        """Calibrated twin configuration for this run."""
        p_true = self.true if self.true.calibrated else calibrate_constants(self.true)
        p_inaccurate = self.inaccurate
        if not p_inaccurate.calibrated:
            p_inaccurate = with_constants(p_inaccurate, p_true)
        return TwinSetup(
            p_true=p_true,
            p_inaccurate=p_inaccurate,
            filter=self.filter,
            spread=self.spread,
            rel_noise=self.schedule.rel_noise,
            abs_floor=self.schedule.abs_floor,
            window=self.window,
            dt=self.run.dt,
        )

    def observation_times(self) -> tuple[float, ...]:
        return self.schedule.resolve_times(self.window)

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        dt: float | None = None,
        out: str | None = None,
        workers: int | None = None,
        plots: bool | None = None,
    ) -> RunConfig:
        """Copy with command-line overrides applied."""
        changes = {
            k: v
            for k, v in dict(seed=seed, dt=dt, out=out, workers=workers, plots=plots).items()
            if v is not None
        }
        run = dataclasses.replace(self.run, **changes)
        return dataclasses.replace(
            self, run=run, filter=dataclasses.replace(self.filter, seed=run.seed)
        )


# ---------------------------------------------------------------------------
# Value coercion


def _number(v: Any, kind: type) -> Any:
    if isinstance(v, str):
        # YAML 1.1 reads exponent floats without a dot (1e-05) as strings
        try:
            v = float(v)
        except ValueError:
            raise TypeError(f"expected a number, got {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError(f"expected a number, got {v!r}")
    if not math.isfinite(v):
        raise TypeError(f"expected a finite number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise TypeError(f"expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _sequence(v: Any, kind: type) -> tuple[Any, ...]:
    if isinstance(v, str):
        m = _RANGE_RE.match(v.strip())
        if m is None:
            raise TypeError(f"expected a list or an 'a..b' range, got {v!r}")
        lo, hi = int(m.group(1)), int(m.group(2))
        return tuple(kind(i) for i in range(lo, hi + 1))
    if isinstance(v, (list, tuple)):
        return tuple(_number(x, kind) for x in v)
    return (_number(v, kind),)


def _matrix(v: Any) -> tuple[tuple[float, ...], ...] | None:
    if v is None:
        return None
    if not isinstance(v, (list, tuple)) or not all(isinstance(r, (list, tuple)) for r in v):
        raise TypeError(f"expected a nested list, got {v!r}")
    return tuple(tuple(_number(x, float) for x in row) for row in v)


def _boolean(v: Any) -> bool:
    if not isinstance(v, bool):
        raise TypeError(f"expected true or false, got {v!r}")
    return v


def _string(v: Any) -> str:
    if isinstance(v, (dict, list)) or v is None:
        raise TypeError(f"expected a string, got {v!r}")
    return str(v)


_COERCERS: dict[str, Callable[[Any], Any]] = {
    "float": lambda v: _number(v, float),
    "int": lambda v: _number(v, int),
    "float | None": lambda v: None if v is None else _number(v, float),
    "bool": _boolean,
    "str": _string,
    "tuple[float, ...]": lambda v: _sequence(v, float),
    "tuple[int, ...]": lambda v: _sequence(v, int),
    "tuple[tuple[float, ...], ...] | None": _matrix,
}

# Config key -> attribute name, where they differ.
KEY_ALIASES = {"lambda": "lam"}
ATTR_ALIASES = {v: k for k, v in KEY_ALIASES.items()}


def _field_types(cls: type) -> dict[str, str]:
    return {f.name: str(f.type) for f in dataclasses.fields(cls)}


def _section_schema(section: str) -> dict[str, str]:
    """Config key -> type string for a section."""
    if section in ("true", "inaccurate"):
        types = _field_types(ModelParams)
        return {ATTR_ALIASES.get(k, k): t for k, t in types.items()}
    if section == "filter":
        types = _field_types(FilterConfig)
        types.pop("seed")
        types["spread"] = "float"
        return types
    if section == "schedule":
        return _field_types(ScheduleConfig)
    if section == "run":
        return _field_types(RunSettings)
    raise KeyError(section)


def _coerce(section: str, key: str, value: Any, line: int | None) -> Any:
    schema = _section_schema(section)
    if key not in schema:
        raise ConfigParseError(f"unknown key '{key}' in section [{section}]", line)
    try:
        return _COERCERS[schema[key]](value)
    except TypeError as exc:
        raise ConfigParseError(f"[{section}] {key}: {exc}", line) from exc


def build_config(sections: Mapping[str, Mapping[str, Any]]) -> RunConfig:
    """Assemble a validated ``RunConfig`` from coerced section values.

    Raises
    ------
    ValidationError
        If any value violates an invariant of its dataclass.
    """
    true_kw = {KEY_ALIASES.get(k, k): v for k, v in sections.get("true", {}).items()}
    inacc_kw = {KEY_ALIASES.get(k, k): v for k, v in sections.get("inaccurate", {}).items()}
    filter_kw = dict(sections.get("filter", {}))
    spread = filter_kw.pop("spread", 0.02)
    run = RunSettings(**sections.get("run", {}))
    return RunConfig(
        true=ModelParams(**true_kw),
        inaccurate=inaccurate_params(**inacc_kw),
        filter=twin_filter(seed=run.seed, **filter_kw),
        spread=spread,
        schedule=ScheduleConfig(**sections.get("schedule", {})),
        run=run,
    )


def _strip_comment(raw: str) -> str:
    end = _CODE_RE.match(raw).end()  # type: ignore[union-attr]
    if end < len(raw) and raw[end] == "#":
        return raw[:end]
    # an unterminated quote: leave the line for YAML to reject
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse the ``key = value`` grammar into a validated ``RunConfig``.

    An empty text gives the default configuration.

    Raises
    ------
    ConfigParseError
        On syntax errors, unknown sections or keys, duplicate keys or
        mistyped values; the message carries the line number.
    ValidationError
        If the parsed values violate a documented invariant.
    """
    sections: dict[str, dict[str, Any]] = {}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        header = _SECTION_RE.match(line)
        if header:
            section = header.group(1)
            if section not in SECTIONS:
                raise ConfigParseError(f"unknown section [{section}]", lineno)
            sections.setdefault(section, {})
            continue
        assign = _ASSIGN_RE.match(line)
        if assign is None:
            raise ConfigParseError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigParseError("assignment before the first [section] header", lineno)
        key, text_value = assign.group(1), assign.group(2).strip()
        if key in sections[section]:
            raise ConfigParseError(f"duplicate key '{key}' in section [{section}]", lineno)
        try:
            value = yaml.safe_load(text_value) if text_value else None
        except yaml.YAMLError as exc:
            raise ConfigParseError(f"cannot read value of '{key}': {exc}", lineno) from exc
        sections[section][key] = _coerce(section, key, value, lineno)
    return build_config(sections)


def load_config(path: str | Path) -> RunConfig:
    """Load a configuration file.

    ``.yaml``, ``.yml`` and ``.json`` files are read as a mapping of section
    name to key/value mapping; any other suffix uses the ``key = value``
    grammar.

    Raises
    ------
    ConfigParseError
        If the file cannot be read or parsed.
    ValidationError
        If a value violates an invariant.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() not in (".yaml", ".yml", ".json"):
        return parse_config(text)

    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigParseError(f"expected a mapping of sections, got {type(data).__name__}")
    sections: dict[str, dict[str, Any]] = {}
    for key, values in data.items():
        # YAML reads a bare ``true:`` key as the boolean
        name = "true" if key is True else str(key)
        if name not in SECTIONS:
            raise ConfigParseError(f"unknown section [{name}]")
        if not isinstance(values, dict):
            raise ConfigParseError(f"section [{name}] must be a mapping")
        sections[name] = {str(k): _coerce(name, str(k), v, None) for k, v in values.items()}
    return build_config(sections)


def read_artifact(path: str | Path) -> pd.DataFrame:
    """Read a CSV artifact back at full precision."""
    return pd.read_csv(path, float_precision="round_trip")
