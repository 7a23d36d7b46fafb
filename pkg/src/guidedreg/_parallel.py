"""Thread-count policy and a deterministic chunked map.

Work is split into contiguous chunks whose results land in disjoint output
slices, so the outcome never depends on the number of workers.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_VAR = "GUIDEDREG_THREADS"
_MIN_CHUNK = 1 << 16


def thread_count():
    """Worker cap from ``GUIDEDREG_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get(ENV_VAR, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)


def chunk_bounds(n, workers):
    if workers <= 1 or n < 2 * _MIN_CHUNK:
        return [(0, n)]
    k = min(workers, max(1, n // _MIN_CHUNK))
    edges = np.linspace(0, n, k + 1).astype(int)
    return list(zip(edges[:-1], edges[1:]))


def map_chunks(fn, n, out):
    """Call ``fn(lo, hi, out[..., lo:hi])`` over contiguous chunks of ``range(n)``."""
    bounds = chunk_bounds(n, thread_count())
    if len(bounds) == 1:
        fn(0, n, out[..., 0:n])
        return out
    with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
        futures = [pool.submit(fn, lo, hi, out[..., lo:hi]) for lo, hi in bounds]
        for f in futures:
            f.result()
    return out
