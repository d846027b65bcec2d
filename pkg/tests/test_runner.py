import json

import pytest

from rp_quantizer.core import (
    CHECKS,
    COMMANDS,
    CheckResult,
    Config,
    PrerequisiteError,
    RunReport,
    SuiteRunner,
    TimeBoundary,
    Verdict,
    merge_parts,
    read_part,
    require,
    write_part,
    write_report,
)
from rp_quantizer.core.runner import commands_for, drift_verdict


def _runner(data, tmp_path, **kwargs):
    messages = []
    runner = SuiteRunner(Config.from_dict(data, tmp_path), on_message=messages.append, **kwargs)
    return runner, messages


def test_full_run_covers_every_check(minimal_config_dict, tmp_path):
    runner, messages = _runner(minimal_config_dict, tmp_path)
    report = runner.run()

    assert list(report.results) == list(CHECKS)
    assert all(isinstance(r.verdict, Verdict) for r in report.results.values())
    assert report.results["C2"].verdict is Verdict.PASS
    assert report.results["wick"].verdict is Verdict.PASS
    assert report.results["isometry"].verdict is Verdict.PASS
    assert report.results["C1"].verdict in (Verdict.PASS, Verdict.FINDING)
    assert report.results["theorem2"].verdict is Verdict.PASS
    assert report.results["wick"].evidence["pairings"]["6"] == {"enumerated": 15, "formula": 15}
    assert messages[0] == "[1/12] C1"
    assert {"kernel", "gram", "spectrum", "density"} <= set(report.tables)
    first = {"row": 0, "col": 0, "row_site": "-2", "col_site": "-2", "value": runner.covariance.kernel[0, 0]}
    assert report.tables["kernel"][0] == first
    assert "quotient" in report.documents
    assert report.constants()["gamma_proof"] == 2 * 1 + 1 + 2


def test_only_selected_checks(minimal_config_dict, tmp_path):
    runner, messages = _runner(minimal_config_dict, tmp_path)
    report = runner.run(["wick", "C2"])
    assert list(report.results) == ["C2", "wick"]
    assert len([m for m in messages if m.startswith("[")]) == 2


def test_report_is_reproducible(minimal_config_dict, tmp_path):
    texts = []
    for name in ("first", "second"):
        runner, _ = _runner(minimal_config_dict, tmp_path)
        config = runner.config
        path = write_report(runner.run(), config.echo(), tmp_path / name)
        texts.append(path.read_bytes())
        assert (tmp_path / name / "timings.json").exists()
        assert (tmp_path / name / "gram.csv").exists()
    assert texts[0] == texts[1]

    document = json.loads(texts[0])
    assert set(document) == {"config", "checks", "constants", "summary"}
    assert sum(document["summary"].values()) == len(CHECKS)
    assert document["config"]["seed"] == 7


def test_seed_changes_sampled_checks(minimal_config_dict, tmp_path):
    a, _ = _runner(minimal_config_dict, tmp_path)
    b, _ = _runner(dict(minimal_config_dict, seed=8), tmp_path)
    first = a.run(["C3"]).results["C3"].evidence
    second = b.run(["C3"]).results["C3"].evidence
    assert first["M_fit"] != second["M_fit"]


def test_periodic_time_is_a_finding_for_dynamics(minimal_config_dict, tmp_path):
    data = dict(minimal_config_dict)
    data["geometry"] = dict(data["geometry"], time_boundary="periodic")
    runner, _ = _runner(data, tmp_path)
    report = runner.run(["C1", "transfer", "FE1"])
    assert report.results["C1"].verdict is Verdict.PASS
    for key in ("transfer", "FE1"):
        result = report.results[key]
        assert result.verdict is Verdict.FINDING
        assert "thermal" in result.error
        assert result.evidence == {}


@pytest.mark.parametrize("residual,boundary,expected", [
    (1e-14, TimeBoundary.INFINITE, Verdict.PASS),
    (1e-14, TimeBoundary.DIRICHLET, Verdict.PASS),
    (1e-6, TimeBoundary.DIRICHLET, Verdict.FINDING),
    (1e-6, TimeBoundary.INFINITE, Verdict.FAIL),
    (1e-6, TimeBoundary.PERIODIC, Verdict.FAIL),
])
def test_drift_verdict(residual, boundary, expected):
    assert drift_verdict(residual, boundary, 1e-10) is expected


def test_whole_line_run_passes_exact_checks(minimal_config_dict, tmp_path):
    data = dict(minimal_config_dict, truncation=2)
    data["geometry"] = dict(data["geometry"], time_boundary="infinite")
    data["density"] = dict(data["density"], degrees=2)
    runner, _ = _runner(data, tmp_path)
    report = runner.run(["C1", "C2", "C3", "isometry", "wick", "transfer", "FE1", "FE2", "theorem2"])

    for key, result in report.results.items():
        assert result.verdict is Verdict.PASS, key
    assert report.results["theorem2"].evidence["anti_time_ordered_residual"] <= 1e-10
    assert report.results["transfer"].evidence["semigroup_defect"] <= 1e-10

    isometry = report.results["isometry"].evidence
    assert isometry["tolerance"] == 1e-12
    assert max(isometry["defect"], isometry["fock_defect"]) <= 1e-12
    assert report.results["wick"].evidence["closed_form_relative_error"] <= 1e-12

    c2 = report.results["C2"].evidence
    assert c2["rank_curve"][-1] == [c2["generators"], c2["eigen_rank"]]
    assert all(a[1] <= b[1] for a, b in zip(c2["rank_curve"], c2["rank_curve"][1:]))
    assert report.documents["quotient"]["rank"] == c2["eigen_rank"]
    assert {"kernel", "gram", "spectrum", "density"} <= set(report.tables)
    assert len(report.tables["gram"]) == c2["generators"] ** 2


def test_prior_spectrum_feeds_m_star(minimal_config_dict, tmp_path):
    prior = {"FE1": CheckResult("FE1", Verdict.PASS, {"M_star": 0.25})}
    runner, _ = _runner(minimal_config_dict, tmp_path, prior=prior)
    assert runner.m_star == 0.25


def test_require_names_the_subcommand(minimal_config_dict, tmp_path):
    config = Config.from_dict(minimal_config_dict, tmp_path)
    with pytest.raises(PrerequisiteError, match="spectrum"):
        require({}, ["FE1"], config.messages)
    require({"FE1": CheckResult("FE1", Verdict.PASS)}, ["FE1"], config.messages)
    assert commands_for(["FE1", "lemma"]) == ["spectrum", "analyticity"]


def test_check_result_round_trip():
    result = CheckResult("transfer", Verdict.FAIL, {"x": 1}, 2.5, "boom")
    restored = CheckResult.from_dict("transfer", result.to_dict())
    assert restored.verdict is Verdict.FAIL
    assert restored.evidence == {"x": 1}
    assert restored.error == "boom"
    assert "error" not in CheckResult("C1", Verdict.PASS).to_dict()


def test_parts_merge_into_report(minimal_config_dict, tmp_path):
    config = Config.from_dict(minimal_config_dict, tmp_path)
    out = tmp_path / "out"
    with pytest.raises(PrerequisiteError):
        merge_parts(out, config.echo(), config.messages)

    for command, keys in COMMANDS.items():
        results = {k: CheckResult(k, Verdict.PASS, {"value": 1.0}, 0.5) for k in keys}
        write_part(command, RunReport(results, {}), config.echo(), out)

    part = read_part("spectrum", out)
    assert set(part) == {"transfer", "FE1"}
    assert part["FE1"].seconds == 0.5

    path, merged = merge_parts(out, config.echo(), config.messages)
    assert list(merged.results) == list(CHECKS)
    assert not merged.failed
    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["summary"] == {"pass": 12, "fail": 0, "finding": 0}
