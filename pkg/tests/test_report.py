import json

import pytest

from pipeline.report import CheckStatus, InvariantReport
from twistor.errors import ZeroPotential


@pytest.fixture
def report():
    return InvariantReport("demo")


def test_record_pass_and_fail(report):
    assert report.record("lie6", 1e-7, 1e-5, "integrate", "lie6").status is CheckStatus.PASS
    assert report.record("holonomy", 1e-3, 1e-7, "check-gc", "holonomy").status is CheckStatus.FAIL
    assert not report.passed


def test_nan_residual_fails(report):
    assert report.record("lie6", float("nan"), 1e-5, "integrate", "lie6").status is CheckStatus.FAIL


def test_duplicate_check_rejected(report):
    report.record("lie6", 0.0, 1e-5, "integrate", "lie6")
    with pytest.raises(ValueError):
        report.skip("lie6", 1e-5, "integrate", "lie6", "again")


def test_skipped_checks_still_pass(report):
    report.record("lie6", 0.0, 1e-5, "integrate", "lie6")
    report.skip("theorem2", 1e-5, "surface", "theorems", "only defined for canal fields")
    assert report.passed


def test_close_pipeline_marks_missing_checks(report):
    report.record("frame_drift", 0.0, 1e-10, "integrate", "frames")
    report.add_error("integrate", "lie6", ZeroPotential("p vanishes"))
    report.close_pipeline("integrate", ["frame_drift", "lie6"], {"frame_drift": 1e-10, "lie6": 1e-5})
    assert report.checks["lie6"].status is CheckStatus.ERROR
    assert report.checks["lie6"].message == "p vanishes"
    assert report.errors == [{"stage": "integrate/lie6", "error": "ZeroPotential", "message": "p vanishes"}]
    assert not report.passed


def test_summary_lines(report):
    report.record("lie6", 0.0, 1e-5, "integrate", "lie6")
    report.record("holonomy", 0.5, 1e-7, "check-gc", "holonomy")
    lines = report.summary_lines()
    assert lines[0] == "✗ check-gc/holonomy: 0.5"
    assert lines[-1] == "demo: FAIL (1 pass, 1 fail, 0 error, 0 skipped)"


def test_write_separates_timings(report, tmp_path):
    report.record("lie6", 2e-6, 1e-5, "integrate", "lie6", {"worst": 2e-6})
    report.timings["integrate"] = 1.25
    report.write(tmp_path)
    data = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert data["passed"] is True
    assert data["checks"][0]["residual"] == 2e-6
    assert "timings" not in data
    assert json.loads((tmp_path / "timing.json").read_text(encoding="utf-8")) == {"integrate": 1.25}
    markdown = (tmp_path / "report.md").read_text(encoding="utf-8")
    assert "## integrate" in markdown and "✓ lie6" in markdown


def test_lower_bound_check(report):
    ok = report.record("holonomy_control", 0.3, 1e-4, "check-gc", "holonomy", at_least=True)
    assert ok.status is CheckStatus.PASS and ok.to_dict()["bound"] == "min"
    assert report.record("broken", 1e-6, 1e-4, "check-gc", "holonomy", at_least=True).status is CheckStatus.FAIL
    assert "3.000e-01 > 1.0e-04" in report.to_markdown()
