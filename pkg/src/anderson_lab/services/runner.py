"""Thread pool for independent trials, blocks and sweeps."""

import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor

from loguru import logger


def default_threads() -> int:
    """Thread cap from ANDERSON_LAB_THREADS, else the CPU count."""
    raw = os.getenv("ANDERSON_LAB_THREADS", "").strip()
    if raw:
        try:
            threads = int(raw)
            if threads >= 1:
                return threads
        except ValueError:
            pass
        logger.warning(f"Ignoring invalid ANDERSON_LAB_THREADS={raw!r}")
    return os.cpu_count() or 1


class TrialRunner:
    """Runs independent tasks, returning results in input order."""

    def __init__(self, threads: int | None = None):
        self.threads = threads or default_threads()
        logger.debug(f"TrialRunner initialized: threads={self.threads}")

    def map[T, R](self, fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
        """Apply fn to every item; results keep the order of items."""
        if self.threads == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        workers = min(self.threads, len(items))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
