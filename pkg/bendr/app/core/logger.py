"""
Logging for the BENDR toolkit.

Console records go through `ShortNameFormatter`: short bracketed logger names in a fixed
column, level names coloured on a terminal. Optimizer steps are recorded separately by the
`bendr.training` logger, which appends bare tab-separated lines to the training log.

Usage:
    - `bendr.manage.main` calls `setup_logging()` once.
    - Modules use `logger = get_logger(__name__)`.
    - Training loops use `get_training_logger(path)`.
"""

import logging
from pathlib import Path
from typing import Optional, Union
from bendr.app.config import settings


TRAINING_LOGGER_NAME = "bendr.training"


class ShortNameFormatter(logging.Formatter):
    """
    Console formatter with short, column-aligned logger names.

    Package prefixes in `STRIPPED_PREFIXES` are removed (`bendr.app.core.pretrain.loop`
    shows as `[pretrain.loop]`), names are padded to `NAME_WIDTH`, and level names are
    coloured when `use_colors` is set.
    """

    LEVEL_COLORS = {
        'DEBUG': '\033[90m',
        'INFO': '\033[32m',
        'WARNING': '\033[33m',
        'ERROR': '\033[31m',
        'CRITICAL': '\033[1;31m',
    }
    RESET_COLOR = '\033[0m'
    NAME_WIDTH = 28
    STRIPPED_PREFIXES = ("bendr.app.core.", "bendr.commands.", "bendr.")

    def __init__(self, fmt: str, use_colors: bool = True):
        super().__init__(fmt)
        self.use_colors = use_colors

    def short_name(self, name: str) -> str:
        for prefix in self.STRIPPED_PREFIXES:
            if name.startswith(prefix):
                return name[len(prefix):]
        return name

    def format(self, record: logging.LogRecord) -> str:
        # Work on a copy; other handlers receive the same record.
        record = logging.makeLogRecord(record.__dict__)
        record.name = f"[{self.short_name(record.name)}]".ljust(self.NAME_WIDTH)
        if self.use_colors and record.levelname in self.LEVEL_COLORS:
            record.levelname = f"{self.LEVEL_COLORS[record.levelname]}{record.levelname}{self.RESET_COLOR}"
        return super().format(record)


def setup_logging(use_colors: bool = True) -> None:
    """
    Send all records to stderr through `ShortNameFormatter`, at `LOG_LEVEL`.

    Called once by `bendr.manage.main`; calling it again replaces the handler.
    """
    handler = logging.StreamHandler()
    handler.setFormatter(ShortNameFormatter('%(levelname)s  %(name)s   %(message)s', use_colors=use_colors))

    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.addHandler(handler)
    root_logger.setLevel(settings.log_level.upper())


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """ Module logger; pass `__name__`. """
    return logging.getLogger(name)


def get_training_logger(path: Optional[Union[str, Path]] = None) -> logging.Logger:
    """
    Return the append-only training record logger.

    Records are written as bare tab-separated lines (no level or logger name) so the
    file stays consumable by plotting tools. Calling this again with another path
    redirects the records to the new file.

    Args:
        path (Optional[Union[str, Path]]): Log file path. Defaults to `settings.training_log`.

    Returns:
        logging.Logger: Logger whose INFO records are appended to the training log.
    """
    path = Path(path or settings.training_log)
    path.parent.mkdir(parents=True, exist_ok=True)

    logger = logging.getLogger(TRAINING_LOGGER_NAME)
    logger.setLevel(logging.INFO)
    logger.propagate = False
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)

    handler = logging.FileHandler(path, mode="a", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    return logger
