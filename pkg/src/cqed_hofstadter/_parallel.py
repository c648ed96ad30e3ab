"""Ordered thread-pool map with BLAS pinned to one thread per worker."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from threadpoolctl import threadpool_limits

A = TypeVar("A")
R = TypeVar("R")

THREADS_ENV = "CQED_HOFSTADTER_THREADS"


def default_threads() -> int:
    """Worker count from the environment, else 1."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {n}")
    return n


def ordered_map(fn: Callable[[A], R], items: Iterable[A], threads: int | None = None) -> list[R]:
    """``[fn(x) for x in items]`` evaluated on a pool, results in input order.

    BLAS is limited to a single thread so that every floating-point reduction
    happens in the same order whatever the worker count.
    """
    items = list(items)
    n = default_threads() if threads is None else int(threads)
    if n < 1:
        raise ValueError(f"thread count must be positive, got {n}")
    with threadpool_limits(limits=1):
        if n == 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(fn, items))
