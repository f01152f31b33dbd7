"""Order-preserving process pool built on fork.

Work items and the mapped function are inherited by the forked workers
instead of being pickled, so large read-only state (the graph, compiled
rules) is shared copy-on-write. Results come back in input order, which
keeps every output independent of the worker count.
"""

from __future__ import annotations

import multiprocessing as mp
import os

_STATE = None


def _call(i):
    fn, items = _STATE
    return fn(items[i])


def parallel_map(fn, items, workers: int = 1) -> list:
    items = list(items)
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    if workers == 1 or len(items) <= 1 or "fork" not in mp.get_all_start_methods():
        return [fn(x) for x in items]
    global _STATE
    _STATE = (fn, items)
    try:
        n = min(workers, len(items))
        chunk = max(1, len(items) // (n * 4))
        with mp.get_context("fork").Pool(n) as pool:
            return pool.map(_call, range(len(items)), chunksize=chunk)
    finally:
        _STATE = None


def default_workers() -> int:
    return os.cpu_count() or 1
