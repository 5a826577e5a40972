"""Counter-based random streams.

A ``(seed, stream)`` pair fully determines the output of :func:`make_rng`, so
results do not depend on how many workers process the streams.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "REGEN_SRS_THREADS"


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        return max(1, int(raw))
    return max(1, os.cpu_count() or 1)


def map_streams(fn, streams):
    """Apply ``fn(stream)`` to every stream id; results are returned sorted by stream id."""
    streams = sorted(streams)
    workers = min(worker_count(), len(streams))
    if workers <= 1:
        return [fn(s) for s in streams]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, streams))
