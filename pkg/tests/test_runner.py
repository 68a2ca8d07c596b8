import json
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad

from liesphere import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main, restrict_to
from pipeline import CheckStatus, config_from_dict, load_config, run
from pipeline.report import InvariantReport
from pipeline.strategy import create_pipeline_strategy, roundtrip_interior
from twistor.potentials import perturbed

SMALL = {"name": "small", "pipelines": ["check-gc"], "grid": [9, 9], "export": {"csv": True, "obj": False}}
CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
CONFIGS = sorted(CONFIG_DIR.glob("*.json"))


def write_config(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


class TestRun:
    def test_report_and_artifacts(self, tmp_path):
        report = run(config_from_dict(SMALL), out_dir=tmp_path)
        assert report.passed, report.summary_lines()
        assert [c.name for c in report.checks.values()] == ["gauss_codazzi", "lie_gc", "holonomy", "holonomy_control"]
        assert report.checks["holonomy_control"].residual > 1e-4
        for name in ("report.json", "report.md", "timing.json", "potentials.csv"):
            assert (tmp_path / name).exists(), f"缺少产物 {name}"

    def test_report_is_reproducible(self, tmp_path):
        config = config_from_dict(SMALL)
        run(config, out_dir=tmp_path / "a")
        run(config, out_dir=tmp_path / "b")
        first = (tmp_path / "a" / "report.json").read_bytes()
        second = (tmp_path / "b" / "report.json").read_bytes()
        assert first == second, "同一配置两次运行的报告不一致"

    def test_stage_error_is_recorded(self, tmp_path):
        config = config_from_dict({**SMALL, "family": {"kind": "c1"},
                                   "domain": {"r1min": 0.4, "r1max": 0.8, "r2min": -0.8, "r2max": -0.4}})
        report = run(config, out_dir=tmp_path)
        assert not report.passed
        assert report.errors[0]["stage"] == "check-gc/family"
        assert report.errors[0]["error"] == "DomainViolation"
        assert all(c.status is CheckStatus.ERROR for c in report.checks.values())

    def test_selected_checks_only(self, tmp_path):
        report = run(config_from_dict({**SMALL, "checks": ["lie_gc"]}), out_dir=tmp_path)
        assert list(report.checks) == ["lie_gc"]

    def test_unknown_strategy(self, tmp_path):
        with pytest.raises(KeyError):
            create_pipeline_strategy("nonsense", config_from_dict(SMALL), None, tmp_path)

    def test_holonomy_control_needs_broken_field(self, tmp_path):
        config = config_from_dict({**SMALL, "checks": ["holonomy_control"], "tolerances": {"holonomy_control": 1e6}})
        report = run(config, out_dir=tmp_path)
        assert report.checks["holonomy_control"].status is CheckStatus.FAIL
        assert not report.passed

    def test_incompatible_field_blocks_integration(self, tmp_path, monkeypatch):
        config = config_from_dict({**SMALL, "pipelines": ["integrate"]})
        report = InvariantReport("blocked")
        strategy = create_pipeline_strategy("integrate", config, report, tmp_path)
        params, P = strategy.lie_field()
        monkeypatch.setattr(strategy, "lie_field", lambda: (params, perturbed(P, "V", "0.1*R2**2")))
        strategy.run()
        assert report.errors[0]["stage"] == "integrate/frames"
        assert report.errors[0]["error"] == "IncompatibleField"
        assert all(c.status is CheckStatus.ERROR for c in report.checks.values())


def test_roundtrip_interior_ignores_border():
    r = np.linspace(0.0, 1.0, 21)
    s = r[2:-2]
    difference = np.full((len(s), len(s)), 1e-6)
    difference[0, :] = 10.0
    difference[:, -1] = 5.0
    difference[8, 8] = 3e-5
    difference[9, 9] = np.nan
    residual, compared = roundtrip_interior(difference, s, s, r, r, inset=0.28)
    assert residual == pytest.approx(3e-5)
    assert compared == 80
    assert roundtrip_interior(np.full_like(difference, np.nan), s, s, r, r)[1] == 0


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_pass(path, tmp_path):
    report = run(load_config(path), out_dir=tmp_path)
    assert report.passed, report.summary_lines()


def test_shipped_configs_present():
    assert {p.stem for p in CONFIGS} >= {"check-gc", "integrate", "surface", "landau", "euclid-roundtrip",
                                        "wilczynski"}


def test_landau_profile_at_origin(tmp_path):
    run(load_config(CONFIG_DIR / "landau.json"), out_dir=tmp_path)
    table = np.loadtxt(tmp_path / "profile.csv", delimiter=",", skiprows=1)
    row = table[np.argmin(np.abs(table[:, 0]))]
    # λ = 1/2, M = k = 1
    integral = quad(lambda s: np.exp(s * s), 0.0, 1.0, epsabs=1e-14, epsrel=1e-14)[0]
    assert row[0] == pytest.approx(0.0, abs=1e-12)
    assert row[1] == pytest.approx(-1.0 / integral - integral / 4, abs=1e-8)
    assert row[2] == pytest.approx(-1.0 / integral + integral / 4, abs=1e-8)


def test_restrict_to_filters_checks():
    config = config_from_dict({"pipelines": ["check-gc", "integrate"], "checks": ["holonomy", "lie6"],
                               "tolerances": {"lie6": 1e-4, "holonomy": 1e-6}})
    narrowed = restrict_to(config, "integrate")
    assert narrowed.pipelines == ["integrate"]
    assert narrowed.checks == ["lie6"]
    assert narrowed.tolerances == {"lie6": 1e-4}


class TestMain:
    def test_list(self, capsys):
        assert main(["--list"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "check-gc: gauss_codazzi, lie_gc, holonomy" in out
        assert "ellipsoid" in out

    def test_nothing_to_run(self):
        assert main([]) == EXIT_CONFIG

    def test_unknown_pipeline(self):
        with pytest.raises(SystemExit) as info:
            main(["warp-drive"])
        assert info.value.code == 2

    def test_invalid_config(self, tmp_path):
        path = write_config(tmp_path / "bad.json", {"pipelines": ["check-gc"], "grid": [1, 1]})
        assert main(["--config", path]) == EXIT_CONFIG

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "dup.json"
        path.write_text('{"pipelines": ["check-gc"], "pipelines": ["surface"]}', encoding="utf-8")
        assert main(["--config", str(path)]) == EXIT_CONFIG

    def test_pass(self, tmp_path, capsys):
        path = write_config(tmp_path / "ok.json", SMALL)
        assert main(["--config", path, "--out", str(tmp_path / "out")]) == EXIT_OK
        assert capsys.readouterr().out.strip().endswith("(4 pass, 0 fail, 0 error, 0 skipped)")

    def test_failed_check(self, tmp_path):
        path = write_config(tmp_path / "strict.json", {**SMALL, "tolerances": {"holonomy": 1e-30}})
        assert main(["--config", path, "--out", str(tmp_path / "out")]) == EXIT_CHECK_FAILED

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("", encoding="utf-8")
        path = write_config(tmp_path / "ok.json", SMALL)
        assert main(["--config", path, "--out", str(blocker)]) == EXIT_RUNTIME
