"""Thread fan-out helper.

``TUNELAB_THREADS`` caps worker threads for per-instance / per-seed
parallelism; results always come back in input order so parallel runs stay
deterministic.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    env = os.environ.get("TUNELAB_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def parallel_map(fn, items):
    """Ordered map over items, threaded when it can help."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
