import json
from pathlib import Path

import pytest

from pipeline.config import (
    DEFAULT_GRID,
    DEFAULT_TOLERANCES,
    PIPELINE_CHECKS,
    PIPELINES,
    ConfigError,
    ConfigParseError,
    ConfigValidationError,
    RunConfig,
    config_from_dict,
    load_config,
    parse_config_text,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def test_minimal_config_gets_defaults():
    config = config_from_dict({"pipelines": ["check-gc"]})
    assert config.schema_version == 1
    assert config.grid == DEFAULT_GRID
    assert config.family is None
    assert config.export.csv and config.export.obj
    assert config.tolerance("holonomy") == DEFAULT_TOLERANCES["holonomy"]
    assert config.requested_checks() == set(PIPELINE_CHECKS["check-gc"])


def test_tolerance_override():
    config = config_from_dict({"pipelines": ["check-gc"], "tolerances": {"holonomy": 1e-3}})
    assert config.tolerance("holonomy") == 1e-3
    assert config.tolerance("lie_gc") == DEFAULT_TOLERANCES["lie_gc"]


def test_step_from_environment(monkeypatch):
    monkeypatch.setenv("LIESPHERE_RK_STEP", "5e-4")
    assert config_from_dict({"pipelines": ["integrate"]}).step == 5e-4


def test_output_dir_precedence(monkeypatch):
    monkeypatch.setenv("LIESPHERE_OUTPUT_DIR", "from-env")
    config = config_from_dict({"pipelines": ["check-gc"]})
    assert config.output_dir() == Path("from-env")
    assert config_from_dict({"pipelines": ["check-gc"], "output": "cfg"}).output_dir() == Path("cfg")
    assert config.output_dir("cli") == Path("cli")


def test_family_discriminator():
    config = config_from_dict({"pipelines": ["landau"], "family": {"kind": "canal", "M": 2.0}})
    assert config.family.kind == "canal"
    assert config.family.M == 2.0
    assert config.family.lam == 0.5


@pytest.mark.parametrize("data, fragment", [
    ({"pipelines": []}, "must not be empty"),
    ({"pipelines": ["check-gc"], "colour": "red"}, "colour"),
    ({"pipelines": ["check-gc"], "family": {"kind": "hyperbolic"}}, "family"),
    ({"pipelines": ["integrate"], "grid": [5, 5]}, "smaller than"),
    ({"pipelines": ["surface"], "grid": [5, 5], "checks": ["theorem1"]}, "theorem1"),
    ({"pipelines": ["check-gc"], "checks": ["theorem1"]}, "not run by the selected pipelines"),
    ({"pipelines": ["check-gc"], "tolerances": {"holonomy": -1.0}}, "must be positive"),
    ({"pipelines": ["landau"], "family": {"kind": "c0"}}, "cannot run on family kind"),
    ({"pipelines": ["landau"], "family": {"kind": "canal", "M": 0}}, "positive"),
    ({"pipelines": ["euclid-roundtrip"], "family": {"kind": "surface", "name": "klein"}}, "unknown surface"),
    ({"pipelines": ["check-gc"], "schema": 2}, "unsupported schema"),
])
def test_rejected(data, fragment):
    with pytest.raises(ConfigValidationError) as info:
        config_from_dict(data)
    assert fragment in str(info.value), f"错误信息中缺少 '{fragment}': {info.value}"


def test_small_grid_allowed_without_stencils():
    config = config_from_dict({"pipelines": ["check-gc"], "grid": [5, 5]})
    assert config.grid == (5, 5)


def test_all_errors_listed():
    with pytest.raises(ConfigValidationError) as info:
        config_from_dict({"pipelines": ["check-gc"], "step": -1, "grid": [1, 1]})
    assert len(info.value.errors) >= 2


class TestParse:
    def test_duplicate_key_has_line(self):
        text = '{\n  "pipelines": ["check-gc"],\n  "grid": [11, 11],\n  "grid": [21, 21]\n}'
        with pytest.raises(ConfigParseError) as info:
            parse_config_text(text)
        assert info.value.line == 4
        assert "duplicate key 'grid'" in str(info.value)

    def test_syntax_error_position(self):
        with pytest.raises(ConfigParseError) as info:
            parse_config_text('{\n  "pipelines": ["check-gc"],\n}')
        assert info.value.line == 3

    def test_top_level_must_be_object(self):
        with pytest.raises(ConfigParseError):
            parse_config_text("[1, 2]")


class TestLoad:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")

    def test_round_trip_through_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"schema": 1, "name": "demo", "pipelines": ["check-gc"],
                                    "family": {"kind": "c1"}}), encoding="utf-8")
        config = load_config(path)
        assert isinstance(config, RunConfig)
        assert config.name == "demo"
        assert config.family.f1 == "4*t**3 - 4*t"

    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_shipped_configs_are_valid(self, path):
        config = load_config(path)
        assert set(config.pipelines) <= set(PIPELINES)
