"""
Logging utilities for the application
"""

import logging
from typing import Optional, Union

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: Optional[Union[str, int]] = None) -> logging.Logger:
    """
    Setup and configure logging for the package

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)

    Returns:
        Configured package logger
    """
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)
    level = level or logging.INFO

    logger = logging.getLogger("witten_rates")
    logger.setLevel(level)

    # Console handler, added once
    if not any(isinstance(h, logging.StreamHandler) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)

    for handler in logger.handlers:
        handler.setLevel(level)

    return logger
