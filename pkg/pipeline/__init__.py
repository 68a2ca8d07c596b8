from .config import ConfigError, ConfigParseError, ConfigValidationError, RunConfig, config_from_dict, load_config
from .export import ExportError, emit_mesh
from .report import CheckStatus, InvariantReport
from .runner import run
from .strategy import PipelineStrategy, create_pipeline_strategy

__all__ = [
    "ConfigError",
    "ConfigParseError",
    "ConfigValidationError",
    "RunConfig",
    "config_from_dict",
    "load_config",
    "ExportError",
    "emit_mesh",
    "CheckStatus",
    "InvariantReport",
    "run",
    "PipelineStrategy",
    "create_pipeline_strategy",
]
