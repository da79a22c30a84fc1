import argparse
import sys
from typing import Optional, Sequence

import structlog

from app.subapps import bench, configs, frechet, gradcheck, rollout, toytrain
from config import KernelConfig, configure_logging, init_settings
from core.runtime import runtime

logger = structlog.get_logger(__name__)

SUBAPPS = (configs, bench, gradcheck, toytrain, rollout, frechet)


def create_app() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hydrana",
        description="Hydra neighborhood attention kernels: benchmarks, config counting, "
                    "gradient checks, toy training and density maps",
    )

    # flags shared by every command
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, help="kernel workers, 0 = one per core, 1 = deterministic")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")
    common.add_argument("--log-format", choices=["console", "json"])

    subparsers = parser.add_subparsers(dest="command", required=True)
    for subapp in SUBAPPS:
        subapp.register(subparsers, common)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse, configure and dispatch one command.

    :returns: int, 0 on success, 2 on invalid input, 1 on I/O failure or failed checks
    """
    args = create_app().parse_args(argv)

    try:
        settings = init_settings()
        default_level = "DEBUG" if settings.debug else settings.log_level
        configure_logging(args.log_level or default_level, args.log_format or settings.log_format)
        kernel_config = KernelConfig.load_from_settings(settings=settings)
        if args.threads is not None:
            kernel_config.threads = args.threads
        runtime.init(**kernel_config.as_dict())
    except ValueError as e:
        print(f"hydrana: error: {e}", file=sys.stderr)
        return 2

    logger.debug("command_start", app=settings.app_name, version=settings.app_version, command=args.command)

    try:
        return args.handler(args, settings)
    except ValueError as e:
        logger.error("invalid_input", command=args.command, error=str(e))
        print(f"hydrana {args.command}: error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        logger.error("io_failure", command=args.command, error=str(e))
        print(f"hydrana {args.command}: error: {e}", file=sys.stderr)
        return 1
    finally:
        runtime.close()
