#!/usr/bin/env python3
"""
Logging utilities for TallyFit.
Unified logging setup: stderr console output plus an optional log file.
"""

import logging
import os
import sys
from typing import Optional

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Setup application logging with console and (optionally) file output.

    Console output goes to stderr so command results on stdout stay parseable.
    """
    numeric_level = getattr(logging, str(level).upper(), None)
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO

    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        directory = os.path.dirname(log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))

    logging.basicConfig(level=numeric_level, format=LOG_FORMAT, handlers=handlers, force=True)

    # numerical libraries can be chatty at DEBUG
    for logger_name in ["matplotlib", "numexpr"]:
        logging.getLogger(logger_name).setLevel(max(numeric_level, logging.WARNING))
