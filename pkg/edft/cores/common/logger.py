# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import functools
import logging
import os
from typing import Callable

# ITER: one line per optimizer iteration. SCF: one line per SCF cycle.
LOG_LEVELS = (
    ("DEBUG", logging.DEBUG),
    ("INFO", logging.INFO),
    ("ITER", 21),
    ("SCF", 22),
    ("WARNING", logging.WARNING),
    ("ERROR", logging.ERROR),
    ("CRITICAL", logging.CRITICAL),
)
LOG_FORMAT = "[%(asctime)-15s] [%(levelname)8s] - %(message)s"


class CustomLogger:
    """Named logger exposing one method per solver level, plus ``exception``."""

    def __init__(self, name: str = "edft"):
        self.logger = logging.getLogger(name or "edft")
        for level_name, level in LOG_LEVELS:
            logging.addLevelName(level, level_name)
            setattr(self, level_name.lower(), functools.partial(self.log_message, level))
        self.exception = self.logger.exception

        if not self.logger.handlers:
            handler = logging.StreamHandler()
            handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT))
            self.logger.addHandler(handler)
        self.set_level(os.environ.get("EDFT_LOG_LEVEL", "INFO"))
        self.logger.propagate = False

    def log_message(self, log_level: int, msg: str):
        self.logger.log(log_level, msg)

    def set_level(self, level):
        """Accepts a level number or a name such as ``"iter"``."""
        self.logger.setLevel(level.upper() if isinstance(level, str) else level)

    def close(self):
        for handler in self.logger.handlers:
            handler.close()

    debug: Callable[[str], None]
    info: Callable[[str], None]
    iter: Callable[[str], None]
    scf: Callable[[str], None]
    warning: Callable[[str], None]
    error: Callable[[str], None]
    critical: Callable[[str], None]
    exception: Callable[[str], None]


logger = CustomLogger()
