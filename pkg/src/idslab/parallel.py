"""Order-preserving fan-out of independent Monte Carlo samples."""

import os
from concurrent.futures import ThreadPoolExecutor


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def map_ordered(fn, items, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, possibly on a thread pool.

    The compiled kernels release the GIL, so threads give real parallelism.
    Results always come back in input order.
    """
    items = list(items)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
