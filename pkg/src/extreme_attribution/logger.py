import logging
import os

from pythonjsonlogger import jsonlogger

LOG_LEVEL_ENV_VAR = "EXTREME_ATTRIBUTION_LOG_LEVEL"

logger = logging.getLogger()
logger.setLevel(os.environ.get(LOG_LEVEL_ENV_VAR, "INFO").upper())

logHandler = logging.StreamHandler()

formatter = jsonlogger.JsonFormatter(timestamp=True)
logHandler.setFormatter(formatter)

for handler in list(logger.handlers):
    logger.removeHandler(handler)
logger.addHandler(logHandler)


def set_level(level: str | int) -> None:
    """Change the root level after import (used by the CLI `--verbose` flag)."""
    logger.setLevel(level.upper() if isinstance(level, str) else level)
