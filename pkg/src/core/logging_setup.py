"""
Logging setup for SecretSieve
Plain-text or JSON structured logging on stderr, optional log file
"""

import logging
import os
import sys
from typing import Optional

from pythonjsonlogger import jsonlogger

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: str = 'INFO', fmt: str = 'text', log_file: Optional[str] = None) -> logging.Logger:
    """Configure the root logger; returns the runner logger"""
    if fmt == 'json':
        formatter = jsonlogger.JsonFormatter(LOG_FORMAT)
    else:
        formatter = logging.Formatter(LOG_FORMAT)

    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    for handler in handlers:
        handler.setFormatter(formatter)
        root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))

    return logging.getLogger('SecretSieve-Runner')
