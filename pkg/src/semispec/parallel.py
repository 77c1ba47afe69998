"""Deterministic-order worker pool."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "SEMISPEC_THREADS"


def worker_count(threads=None) -> int:
    if threads is None:
        threads = os.environ.get(ENV_THREADS, "1")
    try:
        n = int(threads)
    except (TypeError, ValueError):
        raise ValueError(f"invalid worker count {threads!r}") from None
    return max(n, 1)


def pmap(fn, items, threads=None) -> list:
    """Map ``fn`` over ``items``; results come back in input order regardless of scheduling."""
    items = list(items)
    n = worker_count(threads)
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
