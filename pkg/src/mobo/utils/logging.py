"""
Logging configuration for the application.
"""

import logging
import os
from typing import Optional

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
LOG_FILE_NAME = "mobo.log"


def setup_logging(log_dir: Optional[str] = None, level: int = logging.INFO) -> str:
    """
    Configure logging for the application.

    Sets up logging to both the console and a `mobo.log` file inside `log_dir`
    (the current directory when omitted). Log files carry timestamps and are
    kept apart from the deterministic run artifacts.

    Returns:
        Path of the log file
    """
    output_dir = log_dir or "."
    os.makedirs(output_dir, exist_ok=True)
    log_file = os.path.join(output_dir, LOG_FILE_NAME)

    logger = logging.getLogger()
    logger.setLevel(level)

    # Close handlers left over from a previous run in the same process
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers.clear()

    file_handler = logging.FileHandler(log_file, encoding="utf-8")
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
    logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
    logger.addHandler(console_handler)

    logging.info("Logging initialized")
    return log_file
