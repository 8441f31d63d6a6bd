"""Console logging setup.

All diagnostics go to stderr through loguru; stdout carries only
machine-readable output (JSON reports, CSV rows).
"""

from __future__ import annotations

import logging
import os
import sys

from loguru import logger

_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan> - <level>{message}</level>"
)


def color_enabled(requested: bool = True) -> bool:
    """Colour is on unless disabled in config or via ``NO_COLOR``."""
    return requested and not os.getenv("NO_COLOR")


def setup_logging(level: str = "INFO", colorize: bool = True) -> int:
    """Replace loguru's default sink with a single stderr sink.

    Returns:
        The loguru handler id.
    """
    logger.remove()
    handler_id = logger.add(
        sys.stderr,
        level=level.upper(),
        format=_FORMAT,
        colorize=color_enabled(colorize),
        backtrace=False,
        diagnose=False,
    )
    # Route stdlib logging through loguru
    logging.basicConfig(handlers=[_InterceptHandler()], level=0, force=True)
    return handler_id


class _InterceptHandler(logging.Handler):
    def emit(self, record: logging.LogRecord) -> None:
        try:
            level: str | int = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno
        logger.opt(depth=6, exception=record.exc_info).log(level, record.getMessage())
