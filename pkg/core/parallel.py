#!/usr/bin/env python3
"""
Ordered fan-out over precincts.

Work is dispatched to a thread pool capped by the configured thread count and
results are returned in input order, so reductions over them are identical for
any number of threads.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)

_max_workers: int = 1


def set_max_workers(threads: int) -> None:
    """Cap the worker count used by map_ordered (1 runs inline)."""
    global _max_workers
    _max_workers = max(1, int(threads))
    logger.debug(f"Precinct worker pool capped at {_max_workers} thread(s)")


def get_max_workers() -> int:
    return _max_workers


def map_ordered(fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Apply fn to every item; results keep input order."""
    items = list(items)
    if _max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(_max_workers, len(items))) as pool:
        return list(pool.map(fn, items))
