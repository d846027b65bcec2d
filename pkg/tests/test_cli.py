import json

import pytest
from typer.testing import CliRunner

from rp_quantizer.cli import app

runner = CliRunner()


@pytest.fixture
def whole_line_config(minimal_config_dict, write_config):
    data = dict(minimal_config_dict)
    data["geometry"] = dict(data["geometry"], time_boundary="infinite")
    return write_config(data)


def test_init_writes_template(tmp_path):
    target = tmp_path / "rpq.yaml"
    result = runner.invoke(app, ["init", "--output", str(target)])
    assert result.exit_code == 0
    assert target.exists()
    assert str(target) in result.stdout


def test_missing_config_exits_with_error(tmp_path):
    result = runner.invoke(app, ["check-rp", "--config", str(tmp_path / "absent.yaml")])
    assert result.exit_code == 1
    assert "absent.yaml" in result.stdout


def test_spectrum_prints_mass_gap(whole_line_config, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(app, ["spectrum", "--config", str(whole_line_config), "--out-dir", str(out)])
    assert result.exit_code == 0, result.stdout
    assert "0.9624" in result.stdout
    assert (out / "parts" / "spectrum.json").exists()
    assert (out / "spectrum.csv").exists()


def test_analyticity_needs_spectrum(whole_line_config, tmp_path):
    result = runner.invoke(
        app, ["analyticity", "--config", str(whole_line_config), "--out-dir", str(tmp_path / "empty")]
    )
    assert result.exit_code == 1
    assert "spectrum" in result.stdout


def test_report_needs_parts(whole_line_config, tmp_path):
    result = runner.invoke(app, ["report", "--config", str(whole_line_config), "--out-dir", str(tmp_path / "none")])
    assert result.exit_code == 1


def test_run_only_subset(whole_line_config, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(
        app, ["run", "--config", str(whole_line_config), "--out-dir", str(out), "--only", "C2,wick", "--seed", "3"]
    )
    assert result.exit_code == 0, result.stdout
    document = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert sorted(document["checks"]) == ["C2", "wick"]
    assert document["config"]["seed"] == 3
    assert (out / "gram.csv").read_text(encoding="utf-8").startswith("row,col,re,im")
    quotient = json.loads((out / "quotient.json").read_text(encoding="utf-8"))
    assert quotient["rank"] == document["checks"]["C2"]["evidence"]["eigen_rank"]
    assert not (out / "kernel.csv").exists()


def test_subcommands_then_report(whole_line_config, tmp_path):
    out = tmp_path / "out"
    args = ["--config", str(whole_line_config), "--out-dir", str(out)]
    for command in ("check-rp", "spectrum", "bounds", "analyticity", "density"):
        result = runner.invoke(app, [command, *args])
        assert result.exit_code in (0, 1), result.stdout
        assert (out / "parts" / f"{command}.json").exists()
        if command == "check-rp":
            assert (out / "kernel.csv").read_text(encoding="utf-8").startswith("row,col,row_site,col_site,value")

    result = runner.invoke(app, ["report", *args])
    assert result.exit_code in (0, 1)
    document = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert len(document["checks"]) == 12
    assert (out / "timings.json").exists()
