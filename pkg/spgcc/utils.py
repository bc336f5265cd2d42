import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from spgcc.config import LOG_DIR


def setup_logging(name: str, log_file: Optional[Path] = None) -> logging.Logger:
    """
    Logger `spgcc.<name>` writing to stderr and to `log_file` (default: LOG_DIR/<name>.log).
    A second call for the same name returns the configured logger untouched, so every
    trainer or pipeline built in one process shares one pair of handlers.
    """
    logger = logging.getLogger(f"spgcc.{name}")
    if logger.handlers:
        return logger
    logger.propagate = False

    if log_file is None:
        LOG_DIR.mkdir(parents=True, exist_ok=True)
        log_file = LOG_DIR / f"{name}.log"

    logger.setLevel(logging.INFO)
    fmt = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')

    fh = logging.FileHandler(str(log_file))
    fh.setFormatter(fmt)
    logger.addHandler(fh)

    ch = logging.StreamHandler()
    ch.setFormatter(fmt)
    logger.addHandler(ch)

    return logger


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Seeded generator for one named stream of randomness.
    Distinct `stream` tuples give statistically independent generators for the same seed.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(stream)))


@contextmanager
def timed(logger: logging.Logger, label: str) -> Iterator[dict]:
    """Log the wall time of a block; the yielded dict receives `seconds` on exit."""
    record: dict = {}
    start = time.perf_counter()
    try:
        yield record
    finally:
        record["seconds"] = time.perf_counter() - start
        logger.info(f"{label} finished in {record['seconds']:.2f}s")
