"""
Logging configuration

Console and optional file sinks for loguru. Command output goes to stdout,
so log records are written to stderr.
"""

import os
import sys
from typing import Optional

from loguru import logger

from .config import settings

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Replace loguru's default sink with the toolkit sinks."""
    level = (level or settings.log_level).upper()
    logger.remove()
    logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level)

    path = log_file or (settings.log_file_path if settings.log_to_file else None)
    if path:
        log_dir = os.path.dirname(path)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir)
        logger.add(
            path,
            format=FILE_FORMAT,
            level=level,
            rotation=settings.log_file_rotation,
            retention=settings.log_file_retention,
            compression=settings.log_file_compression,
        )
