# topology_designer/app/core/logger.py
import logging
from typing import Optional

from .errors import ConfigurationError
from .settings import get_settings

LOGGER_NAME = "topology_designer"
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(funcName)s - %(message)s"

config = get_settings()

logger = logging.getLogger(LOGGER_NAME)
_stream_handler: Optional[logging.StreamHandler] = None


def configure_logging(level: Optional[str] = None) -> logging.Logger:
    """Set the package log level; the stderr handler is attached once per process."""
    global _stream_handler
    name = (level or config.LOG_LEVEL).upper()
    resolved = logging.getLevelName(name)
    if not isinstance(resolved, int):
        raise ConfigurationError(f"unknown log level {name!r}")

    if _stream_handler is None:
        _stream_handler = logging.StreamHandler()
        _stream_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(_stream_handler)
    _stream_handler.setLevel(resolved)
    logger.setLevel(resolved)
    return logger


configure_logging()
