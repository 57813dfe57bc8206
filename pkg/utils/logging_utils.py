"""
Logging utilities for the Counterdiabatic Driving Toolkit
"""

import logging
import sys
import time
from pathlib import Path
from datetime import datetime
from typing import Optional

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logger(
    name: str,
    log_file: Optional[str] = None,
    level: str = "INFO",
    format_string: Optional[str] = None
) -> logging.Logger:
    """
    Set up a logger with console and optional file handlers.

    Library modules only call ``logging.getLogger(__name__)``; configuring
    handlers is left to the entry point. Configuring the ``cdkit`` logger
    therefore routes every library message through the same handlers.

    Parameters
    ----------
    name : str
        Logger name ("cdkit" for the library root, __name__ for scripts)
    log_file : str, optional
        Path to log file. If None, only console logging is enabled.
    level : str
        Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
    format_string : str, optional
        Custom format string for log messages

    Returns
    -------
    logging.Logger
        Configured logger instance
    """
    logger = logging.getLogger(name)
    try:
        logger.setLevel(getattr(logging, level.upper()))
    except AttributeError:
        raise ValueError(f"Unknown logging level: {level}")

    # Reconfiguring replaces handlers instead of stacking them
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers = []
    logger.propagate = False

    formatter = logging.Formatter(format_string or DEFAULT_FORMAT)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_path)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def setup_from_config(name: str, logging_config: Optional[dict]) -> logging.Logger:
    """
    Configure a logger from the ``logging:`` section of the YAML config.

    Parameters
    ----------
    name : str
        Logger name
    logging_config : dict or None
        Mapping with optional keys level, format, file

    Returns
    -------
    logging.Logger
    """
    logging_config = logging_config or {}
    return setup_logger(
        name=name,
        log_file=logging_config.get('file'),
        level=logging_config.get('level', 'INFO'),
        format_string=logging_config.get('format'),
    )


def log_step(logger: logging.Logger, step_name: str, start: bool = True):
    """
    Log the start or end of a pipeline step with a separator.

    Parameters
    ----------
    logger : logging.Logger
        Logger instance
    step_name : str
        Name of the pipeline step
    start : bool
        If True, log step start. If False, log step completion.
    """
    separator = "=" * 80
    if start:
        logger.info(separator)
        logger.info(f"Starting: {step_name}")
        logger.info(separator)
    else:
        logger.info(f"Completed: {step_name}")
        logger.info(separator)


def log_parameters(logger: logging.Logger, params: dict, title: str = "Parameters"):
    """
    Log a dictionary of parameters, one per line; nested dicts are indented.

    Parameters
    ----------
    logger : logging.Logger
        Logger instance
    params : dict
        Dictionary of parameter names and values
    title : str
        Header line
    """
    logger.info(f"{title}:")
    _log_mapping(logger, params, indent=2)


def _log_mapping(logger: logging.Logger, params: dict, indent: int):
    pad = " " * indent
    for key, value in params.items():
        if isinstance(value, dict) and value:
            logger.info(f"{pad}{key}:")
            _log_mapping(logger, value, indent + 2)
        elif isinstance(value, float):
            logger.info(f"{pad}{key}: {value:.6g}")
        else:
            logger.info(f"{pad}{key}: {value}")


def create_timestamped_log(base_name: str, log_dir: str = "logs") -> str:
    """
    Create a timestamped log file path.

    Parameters
    ----------
    base_name : str
        Base name for the log file
    log_dir : str
        Directory for log files

    Returns
    -------
    str
        Path to timestamped log file
    """
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_dir_path = Path(log_dir)
    log_dir_path.mkdir(parents=True, exist_ok=True)
    return str(log_dir_path / f"{base_name}_{timestamp}.log")


class ProgressLogger:
    """
    Log progress through a long iteration with periodic updates.
    """

    def __init__(self, logger: logging.Logger, total: int, step: int = 1000, label: str = "Progress"):
        """
        Parameters
        ----------
        logger : logging.Logger
            Logger instance
        total : int
            Total number of items to process
        step : int
            Log every N items
        label : str
            Prefix of each progress line
        """
        self.logger = logger
        self.total = max(int(total), 1)
        self.step = max(int(step), 1)
        self.label = label
        self.current = 0
        self._last_logged = 0
        self.start_time = time.perf_counter()

    def update(self, n: int = 1):
        """
        Advance the counter by n items and log when a step boundary is crossed.

        Parameters
        ----------
        n : int
            Number of items processed
        """
        self.current += n
        crossed = self.current // self.step > self._last_logged // self.step
        if crossed or self.current >= self.total:
            self._last_logged = self.current
            elapsed = time.perf_counter() - self.start_time
            rate = self.current / elapsed if elapsed > 0 else 0.0
            remaining = (self.total - self.current) / rate if rate > 0 else 0.0
            percent = 100 * min(self.current, self.total) / self.total
            self.logger.info(
                f"{self.label}: {self.current:,}/{self.total:,} ({percent:.1f}%) | "
                f"Rate: {rate:.1f} items/sec | "
                f"Remaining: {remaining / 60:.1f} min"
            )
