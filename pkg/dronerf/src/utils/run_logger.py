"""
Logging helpers.

Library modules get a plain named logger. Run directories get JSON-lines
files through python-json-logger so round histories and run events can be
parsed back without custom readers.
"""

import logging
from pathlib import Path

from pythonjsonlogger.json import JsonFormatter


LOGGER_PREFIX = "dronerf"
CONSOLE_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def get_logger(name):
    """
    Get a logger under the dronerf namespace.

    Args:
        name (str): usually __name__ of the calling module

    Returns:
        logging.Logger
    """
    if not name.startswith(LOGGER_PREFIX):
        name = f"{LOGGER_PREFIX}.{name}"
    return logging.getLogger(name)


def configure_console(level=logging.WARNING):
    """Attach a single console handler to the root dronerf logger."""
    root = logging.getLogger(LOGGER_PREFIX)
    if not any(getattr(h, "_dronerf_console", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
        handler._dronerf_console = True
        root.addHandler(handler)
    root.setLevel(level)
    return root


def attach_json_file(logger, path, static_fields=None):
    """
    Attach an append-only JSON-lines file handler to a logger.

    Args:
        logger (logging.Logger): logger to extend
        path (str/Path): target .jsonl file (parent dirs are created)
        static_fields (dict): fields added to every record (e.g. run_id)

    Returns:
        logging.FileHandler: the handler, so the caller can detach it
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    handler = logging.FileHandler(path, mode="a", encoding="utf-8")
    handler.setFormatter(JsonFormatter(
        "%(message)s",
        static_fields=static_fields or {},
        json_ensure_ascii=False,
    ))
    logger.addHandler(handler)
    return handler


def detach_handler(logger, handler):
    """Flush, close and remove a handler added with attach_json_file."""
    if handler is None:
        return
    handler.flush()
    handler.close()
    logger.removeHandler(handler)


def get_history_logger(run_id):
    """
    Logger dedicated to one run's round history.

    It does not propagate, so history records only land in the files
    attached to it.
    """
    logger = logging.getLogger(f"{LOGGER_PREFIX}.history.{run_id}")
    logger.setLevel(logging.INFO)
    logger.propagate = False
    return logger


def get_run_logger(run_id):
    """Non-propagating logger for one run's stage events (run.log.jsonl)."""
    logger = logging.getLogger(f"{LOGGER_PREFIX}.runs.{run_id}")
    logger.setLevel(logging.INFO)
    logger.propagate = False
    return logger
