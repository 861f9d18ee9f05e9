"""Logging setup shared by the CLI and the services."""
import logging
import os
import sys
from typing import Optional

LOG_LEVEL_ENV = "IMU_BENCH_LOG_LEVEL"
LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def setup_logging(level: Optional[str] = None) -> None:
    """Configure root logging once; the environment variable wins over ``level``"""
    resolved = os.environ.get(LOG_LEVEL_ENV) or level or "INFO"
    numeric = logging.getLevelName(resolved.upper())
    if not isinstance(numeric, int):
        numeric = logging.INFO
    logging.basicConfig(level=numeric, format=LOG_FORMAT, stream=sys.stderr, force=True)
    # matplotlib is chatty at DEBUG
    logging.getLogger("matplotlib").setLevel(max(numeric, logging.WARNING))
