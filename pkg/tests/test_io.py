"""Tests for configuration loading and deterministic artifact writing."""

import dataclasses
import json
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from glacier_da.core.errors import ConfigParseError, ValidationError
from glacier_da.core.experiments import DEFAULT_SIZES, best_schedule, worse_schedule
from glacier_da.core.models import TWIN_MODEL_NOISE_COV
from glacier_da.io.loaders import RunConfig, load_config, parse_config, read_artifact
from glacier_da.io.writers import (
    MANIFEST_NAME,
    CsvArtifact,
    emit_config,
    emit_csv,
    write_manifest,
    write_resolved_config,
)

SAMPLE = """\
# twin run with a short window
[true]
smb_o = 0.3
lambda = 1.12

[inaccurate]
sill_slope = 0.009   # milder reverse slope

[filter]
N = 20
inflation = 1.05
model_noise_cov = [[1e-05, 0.0], [0.0, 1e-05]]
spread = 0.03

[schedule]
era = post1950
interval = 5

[run]
t1 = 400
dt = 1.0
seed = 4
sizes = 2..5
widths = [5, 50]
"""


def _write(text: str, suffix: str) -> str:
    with tempfile.NamedTemporaryFile(mode="w", suffix=suffix, delete=False) as f:
        f.write(text)
    return f.name


class TestParseConfig:
    def test_empty_gives_defaults(self) -> None:
        assert parse_config("") == RunConfig()

    def test_default_filter_adds_length_noise(self) -> None:
        assert parse_config("").filter.model_noise_cov == TWIN_MODEL_NOISE_COV
        quiet = parse_config("[filter]\nmodel_noise_cov = null\n")
        assert quiet.filter.model_noise_cov is None

    def test_sections(self) -> None:
        cfg = parse_config(SAMPLE)
        assert cfg.true.smb_o == 0.3
        assert cfg.true.lam == 1.12
        assert cfg.inaccurate.sill_slope == 0.009
        assert cfg.inaccurate.smb_o == 0.35
        assert cfg.filter.N == 20
        assert cfg.filter.inflation == 1.05
        assert cfg.filter.model_noise_cov == ((1e-05, 0.0), (0.0, 1e-05))
        assert cfg.filter.seed == 4
        assert cfg.spread == 0.03
        assert cfg.schedule.era == "post1950"
        assert cfg.run.t1 == 400.0
        assert cfg.run.sizes == (2, 3, 4, 5)
        assert cfg.run.widths == (5.0, 50.0)

    def test_sill_min_past_sill_max_raises(self) -> None:
        with pytest.raises(ValidationError, match="sill_min"):
            parse_config("[true]\nsill_min = 430\n")

    def test_unknown_key_reports_line(self) -> None:
        with pytest.raises(ConfigParseError, match="line 3: unknown key 'albedo'"):
            parse_config("[true]\nsmb_o = 0.3\nalbedo = 0.5\n")

    def test_unknown_section_raises(self) -> None:
        with pytest.raises(ConfigParseError, match="unknown section"):
            parse_config("[ocean]\n")

    def test_duplicate_key_raises(self) -> None:
        with pytest.raises(ConfigParseError, match="duplicate key"):
            parse_config("[run]\nseed = 1\nseed = 2\n")

    def test_assignment_outside_section_raises(self) -> None:
        with pytest.raises(ConfigParseError, match="line 1"):
            parse_config("seed = 1\n")

    def test_malformed_line_raises(self) -> None:
        with pytest.raises(ConfigParseError, match="key = value"):
            parse_config("[run]\nseed 1\n")

    def test_mistyped_value_raises(self) -> None:
        with pytest.raises(ConfigParseError, match="expected a number"):
            parse_config("[filter]\nN = many\n")

    def test_fractional_ensemble_size_raises(self) -> None:
        with pytest.raises(ConfigParseError, match="integer"):
            parse_config("[filter]\nN = 2.5\n")

    def test_non_finite_numbers_rejected(self) -> None:
        with pytest.raises(ConfigParseError, match="finite"):
            parse_config("[run]\nseed = .inf\n")
        with pytest.raises(ConfigParseError, match="finite"):
            parse_config("[filter]\ninflation = .nan\n")

    def test_hash_inside_quotes_is_not_a_comment(self) -> None:
        cfg = parse_config('[run]\nout = "runs#1"  # output directory\n')
        assert cfg.run.out == "runs#1"

    def test_quoted_hash_parses_back(self) -> None:
        cfg = parse_config(SAMPLE)
        cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, out="runs#1"))
        assert parse_config(emit_config(cfg)) == cfg

    def test_invalid_value_raises(self) -> None:
        with pytest.raises(ValidationError, match="N must be >= 2"):
            parse_config("[filter]\nN = 1\n")

    def test_emitted_config_parses_back(self) -> None:
        cfg = parse_config(SAMPLE)
        assert parse_config(emit_config(cfg)) == cfg

    def test_default_config_parses_back(self) -> None:
        cfg = RunConfig()
        assert parse_config(emit_config(cfg)) == cfg
        assert cfg.run.sizes == DEFAULT_SIZES


class TestRunConfig:
    def test_twin_setup_shares_constants(self) -> None:
        setup = parse_config(SAMPLE).twin_setup()
        assert setup.p_true.calibrated
        assert setup.p_inaccurate.gamma == setup.p_true.gamma
        assert setup.window == (0.0, 400.0)
        assert setup.filter.N == 20
        assert setup.spread == 0.03

    def test_schedule_resolution(self) -> None:
        assert RunConfig().observation_times() == best_schedule()
        worse = parse_config("[schedule]\nera = worse\n")
        assert worse.observation_times() == worse_schedule()
        none = parse_config("[schedule]\nera = none\n")
        assert none.observation_times() == ()

    def test_custom_times(self) -> None:
        cfg = parse_config("[schedule]\nera = custom\ntimes = [30, 10, 20]\n")
        assert cfg.observation_times() == (10.0, 20.0, 30.0)
        cfg = parse_config("[schedule]\nera = custom\ninterval = 100\nend = 300\n")
        assert cfg.observation_times() == (0.0, 100.0, 200.0)

    def test_overrides_keep_seeds_aligned(self) -> None:
        cfg = RunConfig().with_overrides(seed=7, dt=1.0, out="elsewhere")
        assert cfg.run.seed == 7
        assert cfg.filter.seed == 7
        assert cfg.run.dt == 1.0
        assert cfg.run.out == "elsewhere"

    def test_unknown_era_raises(self) -> None:
        with pytest.raises(ValidationError, match="schedule era"):
            parse_config("[schedule]\nera = medieval\n")


class TestLoadConfig:
    def test_shipped_twin_config_holds_the_defaults(self) -> None:
        cfg = load_config("configs/twin.cfg")
        assert cfg.filter == RunConfig().filter
        assert cfg.spread == RunConfig().spread
        assert cfg.schedule == RunConfig().schedule

    def test_key_value_file(self) -> None:
        path = _write(SAMPLE, ".cfg")
        try:
            assert load_config(path) == parse_config(SAMPLE)
        finally:
            os.unlink(path)

    def test_yaml_file(self) -> None:
        path = _write(
            "true:\n  sill_min: 410\nfilter:\n  N: 12\nrun:\n  dt: 1.0\n  sizes: 2..4\n", ".yaml"
        )
        try:
            cfg = load_config(path)
            assert cfg.true.sill_min == 410.0
            assert cfg.filter.N == 12
            assert cfg.run.sizes == (2, 3, 4)
        finally:
            os.unlink(path)

    def test_json_file(self) -> None:
        path = _write(json.dumps({"inaccurate": {"lambda": 1.2}}), ".json")
        try:
            assert load_config(path).inaccurate.lam == 1.2
        finally:
            os.unlink(path)

    def test_yaml_unknown_key_raises(self) -> None:
        path = _write("run:\n  colour: blue\n", ".yml")
        try:
            with pytest.raises(ConfigParseError, match="unknown key 'colour'"):
                load_config(path)
        finally:
            os.unlink(path)

    def test_missing_file_raises(self) -> None:
        with pytest.raises(ConfigParseError, match="cannot read"):
            load_config("no/such/config.cfg")


class TestEmitCsv:
    def _frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": [0.0, 1.0],
                "sample_id": [0, 0],
                "factor": [0.9, 0.9],
                "H": [2.18, 1.0 / 3.0],
                "L": [4.44, np.nan],
            }
        )

    def test_round_trip_is_exact(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            artifact = emit_csv(self._frame(), "sensitivity", Path(tmpdir) / "s.csv")
            back = read_artifact(artifact.path)
            assert back["H"].iloc[1] == 1.0 / 3.0
            assert np.isnan(back["L"].iloc[1])
            assert artifact.rows == 2

    def test_bytes_are_deterministic(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            a = emit_csv(self._frame(), "sensitivity", Path(tmpdir) / "a.csv")
            b = emit_csv(self._frame(), "sensitivity", Path(tmpdir) / "b.csv")
            assert a.sha256 == b.sha256
            text = a.path.read_bytes().decode("utf-8")
            assert text.startswith("t,sample_id,factor,H,L\n")
            assert "\r" not in text

    def test_missing_column_raises(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            with pytest.raises(ValidationError, match="lacks columns"):
                emit_csv(self._frame().drop(columns="L"), "sensitivity", Path(tmpdir) / "x.csv")

    def test_unknown_schema_raises(self) -> None:
        with pytest.raises(ValidationError, match="schema"):
            emit_csv(self._frame(), "parquet", "x.csv")

    def test_artifact_checks_columns(self) -> None:
        with pytest.raises(ValidationError, match="do not match"):
            CsvArtifact(path=Path("x.csv"), schema="slr", columns=("t",), rows=0, sha256="")


class TestManifest:
    def test_lists_artifacts_and_config(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            out = Path(tmpdir)
            frame = TestEmitCsv()._frame()
            artifact = emit_csv(frame, "sensitivity", out / "sensitivity_smb.csv")
            config = write_resolved_config(RunConfig(), out)
            path = write_manifest(out, "sensitivity", [artifact], config_path=config)
            manifest = json.loads(path.read_text())
            assert path.name == MANIFEST_NAME
            assert manifest["command"] == "sensitivity"
            assert manifest["artifacts"][0]["path"] == "sensitivity_smb.csv"
            assert manifest["artifacts"][0]["sha256"] == artifact.sha256
            assert manifest["config"]["path"] == "resolved-config.cfg"

    def test_resolved_config_ignores_output_directory(self) -> None:
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            texts = []
            for out in (a, b):
                cfg = RunConfig()
                cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, out=out))
                texts.append(write_resolved_config(cfg, out).read_bytes())
            assert texts[0] == texts[1]
            assert b"out = " not in texts[0]

    def test_rewrite_is_byte_identical(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            out = Path(tmpdir)
            artifact = emit_csv(TestEmitCsv()._frame(), "sensitivity", out / "s.csv")
            first = write_manifest(out, "sensitivity", [artifact]).read_bytes()
            second = write_manifest(out, "sensitivity", [artifact]).read_bytes()
            assert first == second
