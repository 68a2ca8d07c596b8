"""
运行配置: JSON 文件 -> RunConfig

配置文件带有版本号字段 ``schema``; 未知的键会被拒绝, 重复的键在解析阶段就报错。
缺省值 (积分步长, 输出目录) 可以由环境变量覆盖。
"""
import inspect
import json
import logging
import os
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from twistor.catalog import CATALOG
from twistor.euclid import TOL_DIRAC_ANALYTIC
from twistor.frame import TOL_DRIFT
from twistor.potentials import TOL_GC_ANALYTIC
from twistor.surface import TOL_QUADRIC, TOL_THM

load_dotenv()

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_GRID = (41, 41)
MIN_STENCIL_GRID = 9

PIPELINES = ("check-gc", "integrate", "surface", "landau", "euclid-roundtrip", "wilczynski")
PipelineName = Literal["check-gc", "integrate", "surface", "landau", "euclid-roundtrip", "wilczynski"]

# 每个流水线在 checks 为空时运行的检查
PIPELINE_CHECKS: Dict[str, Tuple[str, ...]] = {
    "check-gc": ("gauss_codazzi", "lie_gc", "holonomy", "holonomy_control"),
    "integrate": ("frame_drift", "norm_relations", "lie6", "lie6_table",
                  "eigen_H", "eigen_F", "commutator", "magnetic_identity", "curvature"),
    "surface": ("theorem1", "theorem2", "quadric", "normal"),
    "landau": ("wronskian", "closed_form", "landau_gram", "landau_quadric", "landau_profile",
               "landau_H", "landau_F", "landau_commutator"),
    "euclid-roundtrip": ("dirac", "products", "frame_table", "frame_motion", "extracted_gc",
                         "roundtrip_metric"),
    "wilczynski": ("proj_gc", "proj_gc2", "uapvbq", "proj_table", "laplace", "proj_focal", "proj_gauge"),
}

# 需要四阶中心差分模板的检查
STENCIL_CHECKS = frozenset({
    "norm_relations", "lie6", "eigen_H", "eigen_F", "commutator",
    "theorem1", "theorem2", "landau_H", "landau_F", "landau_commutator",
    "dirac", "products", "frame_table", "frame_motion", "extracted_gc", "roundtrip_metric",
    "uapvbq", "laplace", "proj_focal",
})

# 残差必须超过容差才算通过 (负对照)
LOWER_BOUND_CHECKS = frozenset({"holonomy_control"})

DEFAULT_TOLERANCES: Dict[str, float] = {
    "gauss_codazzi": TOL_GC_ANALYTIC,
    "lie_gc": 1e-6,
    "holonomy": 1e-7,
    "holonomy_control": 1e-4,
    "frame_drift": TOL_DRIFT,
    "norm_relations": 1e-5,
    "lie6": 1e-5,
    "lie6_table": 1e-8,
    "eigen_H": 1e-4,
    "eigen_F": 1e-4,
    "commutator": 1e-4,
    "magnetic_identity": 1e-5,
    "curvature": 1e-6,
    "theorem1": TOL_THM,
    "theorem2": TOL_THM,
    "quadric": TOL_QUADRIC,
    "normal": 1e-6,
    "wronskian": 1e-9,
    "closed_form": 1e-8,
    "landau_gram": 1e-8,
    "landau_quadric": 1e-10,
    "landau_profile": 1e-8,
    "landau_H": 1e-4,
    "landau_F": 1e-4,
    "landau_commutator": 1e-4,
    "dirac": TOL_DIRAC_ANALYTIC,
    "products": 1e-5,
    "frame_table": 1e-5,
    "frame_motion": 1e-4,
    "extracted_gc": 1e-3,
    "roundtrip_metric": 1e-4,
    "proj_gc": 1e-8,
    "proj_gc2": 1e-6,
    "uapvbq": 1e-5,
    "proj_table": 1e-8,
    "laplace": 1e-6,
    "proj_focal": TOL_THM,
    "proj_gauge": 1e-6,
}


def default_step() -> float:
    return float(os.getenv("LIESPHERE_RK_STEP", "1e-3"))


def default_output_dir() -> str:
    return os.getenv("LIESPHERE_OUTPUT_DIR", "out")


class ConfigError(Exception):
    """配置文件无法使用"""


class ConfigParseError(ConfigError):
    """JSON 语法错误或重复的键, 附带行列位置"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ConfigValidationError(ConfigError):
    """配置不满足约束, errors 列出所有违反的条目"""

    def __init__(self, errors: List[str]):
        self.errors = errors
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in errors))

    @classmethod
    def from_pydantic(cls, exc: ValidationError) -> "ConfigValidationError":
        errors = []
        for item in exc.errors():
            loc = ".".join(str(part) for part in item["loc"]) or "<root>"
            errors.append(f"{loc}: {item['msg']}")
        return cls(errors)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainModel(_Strict):
    r1min: float
    r1max: float
    r2min: float
    r2max: float

    @model_validator(mode="after")
    def _non_empty(self) -> "DomainModel":
        if self.r1max <= self.r1min or self.r2max <= self.r2min:
            raise ValueError("domain rectangle must have r1max > r1min and r2max > r2min")
        return self


class C0Family(_Strict):
    """c = 0 族 (或同参数的实射影族)"""
    kind: Literal["c0", "projective"]
    eps0: float = 0.3
    eps1: float = 0.2
    eps2: float = -0.1
    alpha: float = 1.0
    rho1: float = 0.0
    rho2: float = 0.0
    s1: float = 0.5
    s2: float = -0.3
    psi1_init: Tuple[float, float] = (0.0, 1.0)
    psi2_init: Tuple[float, float] = (0.0, 1.0)


class C1Family(_Strict):
    kind: Literal["c1"]
    f1: str = "4*t**3 - 4*t"
    f2: str = "-(4*t**3 - 4*t)"
    eps0: float = 0.1
    eps1: float = 0.2
    eps2: float = 0.3


class CanalFamily(_Strict):
    kind: Literal["canal"]
    M: float = 1.0
    lam: float = 0.5
    k: float = 1.0

    @field_validator("M")
    @classmethod
    def _positive_field(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("magnetic strength M must be positive")
        return value

    @field_validator("k")
    @classmethod
    def _nonzero_k(cls, value: float) -> float:
        if value == 0:
            raise ValueError("wavenumber k must be nonzero")
        return value


class SurfaceFamily(_Strict):
    """目录中的欧氏曲面"""
    kind: Literal["surface"]
    name: str = "ellipsoid"
    params: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _known_surface(self) -> "SurfaceFamily":
        if self.name not in CATALOG:
            raise ValueError(f"unknown surface '{self.name}'; available: {', '.join(sorted(CATALOG))}")
        accepted = set(inspect.signature(CATALOG[self.name]).parameters) - {"domain"}
        unknown = sorted(set(self.params) - accepted)
        if unknown:
            raise ValueError(f"surface '{self.name}' has no parameters {', '.join(unknown)}")
        return self


FamilyModel = Annotated[Union[C0Family, C1Family, CanalFamily, SurfaceFamily], Field(discriminator="kind")]


class GaugeModel(_Strict):
    """R¹* = f(R¹), R²* = g(R²), 关于 t 的表达式"""
    f: str = "t"
    g: str = "t"


class LandauModel(_Strict):
    y_min: float = -2.0
    y_max: float = 2.0
    samples: int = 401
    closed_form: Optional[bool] = None
    n_theta: int = 48
    n_bumps: int = 10
    seed: int = 0

    @model_validator(mode="after")
    def _range(self) -> "LandauModel":
        if self.y_max <= self.y_min:
            raise ValueError("landau y range is empty")
        if self.samples < 2 or self.n_theta < 3:
            raise ValueError("landau sampling is too coarse")
        return self


class ExportModel(_Strict):
    csv: bool = True
    obj: bool = True


class RunConfig(_Strict):
    """一次运行的全部参数

    Attributes:
        schema_version: 配置格式版本 (JSON 中写作 ``schema``)
        pipelines: 依次运行的流水线
        family: 势函数族或目录曲面, 缺省时按流水线选择
        domain: 覆盖族的缺省定义域
        grid: 网格节点数 (n1, n2)
        step: RK4 步长
        checks: 只运行列出的检查 (为空时运行全部)
        tolerances: 覆盖缺省容差
        output: 输出目录
    """
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    name: str = "run"
    pipelines: List[PipelineName]
    family: Optional[FamilyModel] = None
    domain: Optional[DomainModel] = None
    grid: Tuple[int, int] = DEFAULT_GRID
    step: float = Field(default_factory=default_step)
    checks: List[str] = Field(default_factory=list)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    gauge: Optional[GaugeModel] = None
    landau: LandauModel = Field(default_factory=LandauModel)
    export: ExportModel = Field(default_factory=ExportModel)
    output: Optional[str] = None

    @field_validator("schema_version")
    @classmethod
    def _known_schema(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {value}, expected {SCHEMA_VERSION}")
        return value

    @field_validator("pipelines")
    @classmethod
    def _non_empty(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("pipeline list must not be empty")
        if len(set(value)) != len(value):
            raise ValueError("pipeline listed more than once")
        return value

    @field_validator("grid")
    @classmethod
    def _grid_size(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        if min(value) < 2:
            raise ValueError("grid needs at least 2 nodes per axis")
        return value

    @field_validator("step")
    @classmethod
    def _positive_step(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("integration step must be positive")
        return value

    @field_validator("checks")
    @classmethod
    def _known_checks(cls, value: List[str]) -> List[str]:
        unknown = sorted(set(value) - set(DEFAULT_TOLERANCES))
        if unknown:
            raise ValueError(f"unknown checks: {', '.join(unknown)}")
        return value

    @field_validator("tolerances")
    @classmethod
    def _positive_tolerances(cls, value: Dict[str, float]) -> Dict[str, float]:
        unknown = sorted(set(value) - set(DEFAULT_TOLERANCES))
        if unknown:
            raise ValueError(f"tolerance for unknown checks: {', '.join(unknown)}")
        bad = sorted(name for name, tol in value.items() if not tol > 0)
        if bad:
            raise ValueError(f"tolerances must be positive: {', '.join(bad)}")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        problems = []
        needs_stencil = sorted(self.requested_checks() & STENCIL_CHECKS)
        if min(self.grid) < MIN_STENCIL_GRID and needs_stencil:
            problems.append(f"grid {self.grid[0]}x{self.grid[1]} is smaller than "
                            f"{MIN_STENCIL_GRID}x{MIN_STENCIL_GRID} required by {', '.join(needs_stencil)}")
        owned = {name for pipeline in self.pipelines for name in PIPELINE_CHECKS[pipeline]}
        orphans = sorted(set(self.checks) - owned)
        if orphans:
            problems.append(f"checks not run by the selected pipelines: {', '.join(orphans)}")
        kind = self.family.kind if self.family is not None else None
        for pipeline in self.pipelines:
            allowed = _ALLOWED_KINDS[pipeline]
            if kind is not None and kind not in allowed:
                problems.append(f"pipeline '{pipeline}' cannot run on family kind '{kind}'")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def requested_checks(self) -> set:
        """本次运行请求的全部检查名"""
        if self.checks:
            return set(self.checks)
        return {name for pipeline in self.pipelines for name in PIPELINE_CHECKS[pipeline]}

    def wants(self, check: str) -> bool:
        return not self.checks or check in self.checks

    def tolerance(self, check: str) -> float:
        return self.tolerances.get(check, DEFAULT_TOLERANCES[check])

    def output_dir(self, override: Optional[str] = None) -> Path:
        return Path(override or self.output or default_output_dir())


_ALLOWED_KINDS: Dict[str, Tuple[str, ...]] = {
    "check-gc": ("c0", "c1", "canal"),
    "integrate": ("c0", "c1", "canal"),
    "surface": ("c0", "c1", "canal"),
    "landau": ("canal",),
    "euclid-roundtrip": ("surface",),
    "wilczynski": ("projective",),
}


def _reject_duplicates(pairs: List[Tuple[str, Any]]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for key, value in pairs:
        if key in out:
            raise ConfigParseError(f"duplicate key '{key}'")
        out[key] = value
    return out


def parse_config_text(text: str) -> Dict[str, Any]:
    """解析 JSON 文本, 拒绝重复的键

    Raises:
        ConfigParseError: 语法错误 (带行列号) 或重复的键
    """
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as e:
        raise ConfigParseError(e.msg, line=e.lineno, column=e.colno) from e
    except ConfigParseError as e:
        line = _locate_duplicate(text, str(e))
        if line is not None:
            raise ConfigParseError(str(e), line=line, column=1) from None
        raise
    if not isinstance(data, dict):
        raise ConfigParseError("top-level value must be an object", line=1, column=1)
    return data


def _locate_duplicate(text: str, message: str) -> Optional[int]:
    """重复键第二次出现的行号"""
    key = message.split("'")[1] if message.count("'") >= 2 else None
    if key is None:
        return None
    seen = 0
    for number, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            seen += 1
            if seen == 2:
                return number
    return None


def config_from_dict(data: Dict[str, Any]) -> RunConfig:
    """
    校验字典并构造 RunConfig

    Raises:
        ConfigValidationError: 违反任何约束
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigValidationError.from_pydantic(e) from e


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    读取并校验配置文件

    Args:
        path: JSON 配置文件路径

    Returns:
        RunConfig: 已填充缺省值的配置

    Raises:
        ConfigError: 文件无法读取
        ConfigParseError: JSON 语法错误或重复键
        ConfigValidationError: 违反约束
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    config = config_from_dict(parse_config_text(text))
    logger.info(f"Loaded config {path} (pipelines: {', '.join(config.pipelines)})")
    return config
