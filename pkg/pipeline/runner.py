import logging
from pathlib import Path
from typing import Optional, Union

from pipeline.config import RunConfig
from pipeline.export import ensure_dir
from pipeline.report import InvariantReport
from pipeline.strategy import create_pipeline_strategy

logger = logging.getLogger(__name__)


def run(config: RunConfig, out_dir: Optional[Union[str, Path]] = None) -> InvariantReport:
    """
    依次运行配置中的流水线并写出报告

    模块错误按阶段记录在报告里; 只有 ExportError (产物写不出去) 会向上抛出。

    Args:
        config: 已校验的配置
        out_dir: 覆盖配置与环境变量中的输出目录

    Returns:
        InvariantReport: passed 为 False 时命令行以 1 退出
    """
    out = ensure_dir(config.output_dir(str(out_dir) if out_dir is not None else None))
    report = InvariantReport(config.name, meta={
        "schema": config.schema_version,
        "pipelines": list(config.pipelines),
        "grid": list(config.grid),
        "step": config.step,
    })
    context = {}
    for name in config.pipelines:
        strategy = create_pipeline_strategy(name, config, report, out, context)
        strategy.run()
    report.write(out)
    status = "passed" if report.passed else "FAILED"
    logger.info(f"Run '{config.name}' {status}: {len(report.checks)} checks, {len(report.errors)} stage errors")
    return report
