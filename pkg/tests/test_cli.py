"""Tests for CLI."""

import json
import os
import tempfile

import pytest
from click.testing import CliRunner

from glacier_da import __version__
from glacier_da.cli.main import cli
from glacier_da.io.loaders import read_artifact
from glacier_da.io.writers import SCHEMAS

QUICK = "configs/quick.cfg"


def _run(*args: str) -> tuple[int, str, str]:
    runner = CliRunner()
    with tempfile.TemporaryDirectory() as tmpdir:
        result = runner.invoke(cli, [*args, "--out", tmpdir])
        listing = ",".join(sorted(os.listdir(tmpdir)))
    return result.exit_code, result.output, listing


class TestCLI:
    def test_version(self) -> None:
        result = CliRunner().invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_truth_produces_output_files(self) -> None:
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            result = runner.invoke(cli, ["truth", "--config", QUICK, "--out", tmpdir])
            assert result.exit_code == 0, result.output
            for name in ("truth.csv", "summary.md", "manifest.json", "resolved-config.cfg"):
                assert os.path.exists(os.path.join(tmpdir, name))
            frame = read_artifact(os.path.join(tmpdir, "truth.csv"))
            assert list(frame.columns) == SCHEMAS["runrecord"]
            assert len(frame) == 401
            assert frame["H_truth"].iloc[0] == pytest.approx(2.18)
            assert frame["H_analysis"].isna().all()

    def test_assimilate_runrecord(self) -> None:
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            result = runner.invoke(cli, ["assimilate", "--config", QUICK, "--out", tmpdir])
            assert result.exit_code == 0, result.output
            frame = read_artifact(os.path.join(tmpdir, "runrecord.csv"))
            assert frame["H_obs"].notna().sum() == 22
            with open(os.path.join(tmpdir, "summary.md")) as f:
                summary = f.read()
            assert "Mean square difference" in summary
            assert "pre1900" in summary

    def test_manifest_lists_outputs(self) -> None:
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            result = runner.invoke(cli, ["assimilate", "--config", QUICK, "--out", tmpdir])
            assert result.exit_code == 0, result.output
            with open(os.path.join(tmpdir, "manifest.json")) as f:
                manifest = json.load(f)
            assert manifest["command"] == "assimilate"
            assert [a["path"] for a in manifest["artifacts"]] == ["runrecord.csv"]
            assert [f["path"] for f in manifest["files"]] == ["summary.md"]
            assert manifest["config"]["path"] == "resolved-config.cfg"

    def test_reruns_are_byte_identical(self) -> None:
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            for out in (a, b):
                result = runner.invoke(
                    cli, ["assimilate", "--config", QUICK, "--seed", "3", "--out", out]
                )
                assert result.exit_code == 0, result.output
            for name in ("runrecord.csv", "manifest.json", "resolved-config.cfg"):
                with open(os.path.join(a, name), "rb") as fa:
                    first = fa.read()
                with open(os.path.join(b, name), "rb") as fb:
                    assert fb.read() == first

    def test_seed_flag_overrides_config(self) -> None:
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            result = runner.invoke(
                cli, ["truth", "--config", QUICK, "--seed", "5", "--out", tmpdir]
            )
            assert result.exit_code == 0, result.output
            with open(os.path.join(tmpdir, "resolved-config.cfg")) as f:
                assert "seed = 5" in f.read()

    def test_sweep_ensemble(self) -> None:
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            result = runner.invoke(
                cli, ["sweep-ensemble", "--config", QUICK, "--out", tmpdir]
            )
            assert result.exit_code == 0, result.output
            frame = read_artifact(os.path.join(tmpdir, "sweep_ensemble.csv"))
            assert list(frame.columns) == SCHEMAS["sweep"]
            assert list(frame["axis"]) == [2.0, 3.0]
            assert list(frame["seeds"]) == [2, 2]

    def test_sweep_scheme(self) -> None:
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            result = runner.invoke(cli, ["sweep-scheme", "--config", QUICK, "--out", tmpdir])
            assert result.exit_code == 0, result.output
            frame = read_artifact(os.path.join(tmpdir, "sweep_scheme_pre1900.csv"))
            assert list(frame["axis"]) == [10.0, 50.0]

    def test_sensitivity(self) -> None:
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            result = runner.invoke(cli, ["sensitivity", "--config", QUICK, "--out", tmpdir])
            assert result.exit_code == 0, result.output
            frame = read_artifact(os.path.join(tmpdir, "sensitivity_smb.csv"))
            assert list(frame.columns) == SCHEMAS["sensitivity"]
            assert sorted(frame["sample_id"].unique()) == [0, 1, 2]

    def test_project_and_slr(self) -> None:
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            result = runner.invoke(cli, ["project", "--config", QUICK, "--out", tmpdir])
            assert result.exit_code == 0, result.output
            assert os.path.exists(os.path.join(tmpdir, "projection.csv"))
            result = runner.invoke(cli, ["slr", "--config", QUICK, "--out", tmpdir])
            assert result.exit_code == 0, result.output
            for width in ("5", "50", "100"):
                frame = read_artifact(os.path.join(tmpdir, f"slr_{width}km.csv"))
                assert list(frame.columns) == SCHEMAS["slr"]
                assert frame["Vcum_km3"].iloc[0] == 0.0
            with open(os.path.join(tmpdir, "summary.md")) as f:
                assert "733 glaciers" in f.read()

    def test_plot_flag_renders_svg(self) -> None:
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            result = runner.invoke(
                cli, ["assimilate", "--config", QUICK, "--plot", "--out", tmpdir]
            )
            assert result.exit_code == 0, result.output
            assert os.path.getsize(os.path.join(tmpdir, "runrecord.svg")) > 0


class TestCLIErrors:
    def test_invalid_value_exits_2(self) -> None:
        with tempfile.NamedTemporaryFile(mode="w", suffix=".cfg", delete=False) as f:
            f.write("[true]\nsill_min = 430\n")
        try:
            code, output, _ = _run("truth", "--config", f.name)
            assert code == 2
            payload = json.loads(output.split("error: ", 1)[1].splitlines()[0])
            assert payload["type"] == "ValidationError"
            assert payload["exit_code"] == 2
        finally:
            os.unlink(f.name)

    def test_parse_error_exits_2(self) -> None:
        with tempfile.NamedTemporaryFile(mode="w", suffix=".cfg", delete=False) as f:
            f.write("[glacier]\n")
        try:
            code, output, _ = _run("truth", "--config", f.name)
            assert code == 2
            assert "ConfigParseError" in output
        finally:
            os.unlink(f.name)

    def test_infinite_seed_exits_2(self) -> None:
        with tempfile.NamedTemporaryFile(mode="w", suffix=".cfg", delete=False) as f:
            f.write("[run]\nseed = .inf\n")
        try:
            code, output, listing = _run("truth", "--config", f.name)
            assert code == 2
            payload = json.loads(output.split("error: ", 1)[1].splitlines()[0])
            assert payload["type"] == "ConfigParseError"
            assert listing == ""
        finally:
            os.unlink(f.name)

    def test_model_error_exits_3(self) -> None:
        with tempfile.NamedTemporaryFile(mode="w", suffix=".cfg", delete=False) as f:
            f.write("[true]\nb0 = 500\n")
        try:
            code, output, _ = _run("truth", "--config", f.name)
            assert code == 3
            assert "NonMarineBedError" in output
        finally:
            os.unlink(f.name)

    def test_missing_config_is_usage_error(self) -> None:
        code, _, listing = _run("truth", "--config", "no/such/file.cfg")
        assert code == 2
        assert listing == ""
