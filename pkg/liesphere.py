import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from pipeline.config import (
    PIPELINE_CHECKS,
    PIPELINES,
    ConfigError,
    RunConfig,
    config_from_dict,
    load_config,
)
from pipeline.export import ExportError
from pipeline.runner import run
from twistor.catalog import CATALOG

# Load environment variables
load_dotenv()

logger = logging.getLogger("liesphere")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def setup_logging(verbose: bool = False) -> None:
    """控制台日志, 级别取 LIESPHERE_LOG_LEVEL (--verbose 时为 DEBUG)"""
    level_name = "DEBUG" if verbose else os.getenv("LIESPHERE_LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, logging.INFO)

    # Create console handler with formatting
    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')
    console_handler.setFormatter(formatter)

    for name in ("liesphere", "pipeline", "twistor"):
        named = logging.getLogger(name)
        named.setLevel(level)
        named.handlers.clear()
        named.addHandler(console_handler)
        # Disable propagation to root logger
        named.propagate = False


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liesphere",
        description="Integrate Lie sphere frames from twistor potentials and check the geometric invariants.",
    )
    parser.add_argument("pipeline", nargs="?", choices=PIPELINES,
                        help="run only this pipeline (overrides the config's pipelines)")
    parser.add_argument("--config", "-c", help="JSON run configuration")
    parser.add_argument("--out", "-o", help="output directory (default: config, then LIESPHERE_OUTPUT_DIR, then ./out)")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    parser.add_argument("--list", action="store_true", help="list pipelines, their checks and catalog surfaces")
    return parser


def restrict_to(config: RunConfig, pipeline: str) -> RunConfig:
    """只保留一个流水线, 连同属于它的检查和容差"""
    data = config.model_dump(by_alias=True, exclude_none=True)
    own = set(PIPELINE_CHECKS[pipeline])
    data["pipelines"] = [pipeline]
    data["checks"] = [c for c in config.checks if c in own]
    data["tolerances"] = {k: v for k, v in config.tolerances.items() if k in own}
    return config_from_dict(data)


def print_listing() -> None:
    for name in PIPELINES:
        print(f"{name}: {', '.join(PIPELINE_CHECKS[name])}")
    print(f"surfaces: {', '.join(sorted(CATALOG))}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    if args.list:
        print_listing()
        return EXIT_OK

    try:
        if args.config:
            config = load_config(args.config)
            if args.pipeline:
                config = restrict_to(config, args.pipeline)
        elif args.pipeline:
            config = config_from_dict({"pipelines": [args.pipeline], "name": args.pipeline})
        else:
            parser.print_usage(sys.stderr)
            logger.error("Either a pipeline or --config is required")
            return EXIT_CONFIG
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG

    try:
        report = run(config, out_dir=args.out)
    except ExportError as e:
        logger.error(f"Could not write artifacts: {e}", exc_info=True)
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"Run aborted: {e}", exc_info=True)
        return EXIT_RUNTIME

    for line in report.summary_lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
