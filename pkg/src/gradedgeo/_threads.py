"""Bounded thread-pool helper for batch evaluations.

All batch loops in the package are over independent, pure evaluations, so
they may run on a thread pool.  The pool width is capped by the
``GRADEDGEO_THREADS`` environment variable (default 1, i.e. serial);
results are always assembled in input order so output never depends on
the schedule.
"""

import os
from concurrent.futures import ThreadPoolExecutor

_ENV_VAR = "GRADEDGEO_THREADS"


def worker_count():
    raw = os.environ.get(_ENV_VAR, "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def indexed_map(fn, items):
    """Map ``fn`` over ``items`` preserving order; threaded when allowed."""
    items = list(items)
    workers = min(worker_count(), max(1, len(items)))
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
