"""Small shared helpers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

WORKERS_ENV = "DDEBRANCH_WORKERS"


def worker_count() -> int:
    try:
        n = int(os.environ.get(WORKERS_ENV, "1"))
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    """Map preserving order; threads when DDEBRANCH_WORKERS > 1.

    Workloads here are numpy-heavy (the BLAS calls release the GIL), so
    threads give a useful speedup without pickling overhead.
    """
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
