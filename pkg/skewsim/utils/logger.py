"""Logging setup built on rich"""

import logging

from rich.console import Console
from rich.logging import RichHandler

PACKAGE_LOGGER = 'skewsim'


def setup_logging(level: str = 'WARNING') -> logging.Logger:
    """Attach a RichHandler to the package logger.

    Calling it again only changes the level; handlers are never stacked.

    Args:
        level: Logging level name (DEBUG, INFO, WARNING, ...)

    Returns:
        The package logger
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(getattr(logging, str(level).upper(), logging.WARNING))

    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(console=Console(stderr=True), rich_tracebacks=False,
                              show_path=False, markup=False)
        handler.setFormatter(logging.Formatter('%(name)s: %(message)s'))
        logger.addHandler(handler)
        logger.propagate = False

    return logger
