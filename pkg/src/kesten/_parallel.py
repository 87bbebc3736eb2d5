"""Replica-chunk parallelism with results reduced in replica order."""
from __future__ import annotations

import os
from contextlib import contextmanager
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 4096
_threads: int | None = None
_forced: int | None = None


def set_threads(n: int | None) -> None:
    global _threads
    _threads = None if n is None else max(1, int(n))


def get_threads() -> int:
    if _forced is not None:
        return _forced
    env = os.environ.get("KESTEN_THREADS")
    if env:
        return max(1, int(env))
    return _threads or 1


@contextmanager
def forced_threads(n: int):
    """Use exactly ``n`` threads inside the block, ignoring KESTEN_THREADS."""
    global _forced
    prev, _forced = _forced, max(1, int(n))
    try:
        yield
    finally:
        _forced = prev


def chunks(n: int, size: int = CHUNK):
    return [np.arange(lo, min(n, lo + size), dtype=np.uint64) for lo in range(0, n, size)]


def map_replicas(fn, n: int, size: int = CHUNK) -> list:
    """Apply ``fn(replica_ids)`` to fixed-size chunks; results keep chunk order.

    Chunk boundaries do not depend on the thread count, and each replica's
    randomness depends only on its own id, so the concatenated output is the
    same for any number of threads.
    """
    parts = chunks(n, size)
    threads = get_threads()
    if threads == 1 or len(parts) == 1:
        return [fn(p) for p in parts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, parts))
