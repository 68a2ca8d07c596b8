"""不变量报告: 每个检查一行, 外加阶段错误与耗时"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from pipeline.export import write_json, write_text

logger = logging.getLogger(__name__)


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    ERROR = "error"
    SKIPPED = "skipped"

    @property
    def mark(self) -> str:
        return {"pass": "✓", "fail": "✗", "error": "!", "skipped": "☐"}[self.value]


@dataclass
class CheckResult:
    name: str
    pipeline: str
    stage: str
    status: CheckStatus
    tolerance: float
    residual: Optional[float] = None
    details: Dict[str, float] = field(default_factory=dict)
    message: Optional[str] = None
    # "max": residual ≤ tolerance; "min": residual > tolerance
    bound: str = "max"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "pipeline": self.pipeline,
            "stage": self.stage,
            "status": self.status.value,
            "bound": self.bound,
            "tolerance": self.tolerance,
            "residual": self.residual,
            "details": dict(self.details),
            "message": self.message,
        }


@dataclass
class InvariantReport:
    """
    一次运行的检查结果

    checks 按记录顺序保存, 每个名字只出现一次; timings 单独写入 timing.json,
    使 report.json 对同一配置逐字节可复现。
    """
    name: str
    meta: Dict[str, Any] = field(default_factory=dict)
    checks: Dict[str, CheckResult] = field(default_factory=dict)
    errors: List[Dict[str, str]] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)

    def record(self, name: str, residual: float, tolerance: float, pipeline: str, stage: str,
               details: Optional[Dict[str, float]] = None, at_least: bool = False) -> CheckResult:
        """
        记录一个数值检查; residual 为 NaN 时视为失败

        Args:
            at_least: 为 True 时 residual 必须严格大于 tolerance 才通过

        Raises:
            ValueError: 同名检查已经存在
        """
        residual = float(residual)
        within = residual > tolerance if at_least else residual <= tolerance
        status = CheckStatus.PASS if math.isfinite(residual) and within else CheckStatus.FAIL
        result = CheckResult(name, pipeline, stage, status, tolerance, residual,
                             {k: float(v) for k, v in (details or {}).items()}, bound="min" if at_least else "max")
        self._add(result)
        log = logger.info if status is CheckStatus.PASS else logger.warning
        log(f"[{status.value}] {name}: {residual:.3e} ({'min' if at_least else 'tol'} {tolerance:.1e})")
        return result

    def skip(self, name: str, tolerance: float, pipeline: str, stage: str, reason: str) -> CheckResult:
        result = CheckResult(name, pipeline, stage, CheckStatus.SKIPPED, tolerance, message=reason)
        self._add(result)
        logger.info(f"[skipped] {name}: {reason}")
        return result

    def add_error(self, pipeline: str, stage: str, exc: BaseException) -> None:
        """阶段抛出的模块错误, 原样记录"""
        self.errors.append({"stage": f"{pipeline}/{stage}", "error": type(exc).__name__, "message": str(exc)})

    def close_pipeline(self, pipeline: str, requested: Iterable[str], tolerances: Dict[str, float]) -> None:
        """请求过但因阶段出错而没有结果的检查记为 error"""
        failed = [e for e in self.errors if e["stage"].startswith(f"{pipeline}/")]
        reason = failed[-1]["message"] if failed else "check was not evaluated"
        for name in requested:
            if name not in self.checks:
                self._add(CheckResult(name, pipeline, "-", CheckStatus.ERROR, tolerances[name], message=reason))

    def _add(self, result: CheckResult) -> None:
        if result.name in self.checks:
            raise ValueError(f"check '{result.name}' recorded twice")
        self.checks[result.name] = result

    @property
    def passed(self) -> bool:
        return not self.errors and all(c.status in (CheckStatus.PASS, CheckStatus.SKIPPED)
                                       for c in self.checks.values())

    def summary_lines(self) -> List[str]:
        """命令行输出: 每个未通过的检查一行, 最后一行是计数"""
        lines = [f"{c.status.mark} {c.pipeline}/{c.name}: {c.message or c.residual}"
                 for c in self.checks.values() if c.status in (CheckStatus.FAIL, CheckStatus.ERROR)]
        lines += [f"! {e['stage']}: {e['error']}: {e['message']}" for e in self.errors]
        counts = {status: 0 for status in CheckStatus}
        for check in self.checks.values():
            counts[check.status] += 1
        lines.append(f"{self.name}: {'PASS' if self.passed else 'FAIL'} ("
                     + ", ".join(f"{counts[s]} {s.value}" for s in CheckStatus) + ")")
        return lines

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "meta": self.meta,
            "checks": [c.to_dict() for c in self.checks.values()],
            "errors": list(self.errors),
            "artifacts": sorted(self.artifacts),
        }

    def to_markdown(self) -> str:
        """按流水线分节的 markdown 摘要"""
        markdown = f"# Invariant Report: {self.name}\n\n"
        markdown += f"Result: {'PASS' if self.passed else 'FAIL'}\n\n"
        pipelines: List[str] = []
        for check in self.checks.values():
            if check.pipeline not in pipelines:
                pipelines.append(check.pipeline)
        for pipeline in pipelines:
            markdown += f"## {pipeline}\n\n"
            for check in self.checks.values():
                if check.pipeline != pipeline:
                    continue
                if check.residual is None:
                    markdown += f"- {check.status.mark} {check.name}: {check.message}\n"
                else:
                    sign = ">" if check.bound == "min" else "/"
                    markdown += f"- {check.status.mark} {check.name}: {check.residual:.3e} {sign} {check.tolerance:.1e}\n"
            markdown += "\n"
        if self.errors:
            markdown += "## Errors\n\n"
            for error in self.errors:
                markdown += f"- {error['stage']}: {error['error']}: {error['message']}\n"
            markdown += "\n"
        if self.artifacts:
            markdown += "## Artifacts\n\n"
            markdown += "\n".join(f"- {name}" for name in sorted(self.artifacts)) + "\n"
        return markdown.strip() + "\n"

    def write(self, out_dir: Path) -> None:
        """
        写出 report.json, timing.json 与 report.md

        Raises:
            ExportError: 写文件失败
        """
        out_dir = Path(out_dir)
        write_json(out_dir / "report.json", self.to_dict())
        write_json(out_dir / "timing.json", self.timings)
        write_text(out_dir / "report.md", self.to_markdown())
        logger.info(f"Report written to {out_dir}")
