"""
structlog setup shared by every command
"""
import logging
import sys

import orjson
import structlog


def configure_logging(level: str = "INFO", fmt: str = "console") -> None:
    """
    Install structlog processors; events go to stderr so stdout stays clean

    :param level: str, standard level name (DEBUG, INFO, ...)
    :param fmt: str, 'console' for human output or 'json' for one object per line
    """
    if fmt not in ("console", "json"):
        raise ValueError(f"Unsupported log format: {fmt}")

    numeric_level = logging.getLevelName(level.upper())
    if not isinstance(numeric_level, int):
        raise ValueError(f"Unknown log level: {level}")

    processors = [
        structlog.contextvars.merge_contextvars,
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="iso", utc=True),
    ]
    if fmt == "json":
        processors.append(structlog.processors.JSONRenderer(serializer=orjson.dumps))
        logger_factory = structlog.BytesLoggerFactory(file=sys.stderr.buffer)
    else:
        processors.append(structlog.dev.ConsoleRenderer(colors=False))
        logger_factory = structlog.PrintLoggerFactory(file=sys.stderr)

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.make_filtering_bound_logger(numeric_level),
        logger_factory=logger_factory,
        cache_logger_on_first_use=False,
    )
