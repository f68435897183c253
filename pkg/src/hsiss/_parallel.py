"""Worker pool and deterministic reduction helpers.

Every parallel loop in the package partitions work into pieces whose
results do not depend on how many workers run them, so outputs are
bit-identical for any worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

REDUCTION_CHUNK = 4096


def resolve_workers(n_workers):
    """Map ``0`` (auto) to the CPU count; reject negative values."""
    if n_workers is None or n_workers == 0:
        return max(1, os.cpu_count() or 1)
    if n_workers < 0:
        raise ValueError(f"worker count must be >= 0, got {n_workers}")
    return int(n_workers)


def split_range(n, parts):
    """Split ``range(n)`` into at most ``parts`` contiguous (start, stop) spans."""
    parts = max(1, min(parts, n)) if n > 0 else 1
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def parallel_map(fn, items, n_workers=1, executor=None):
    """Apply ``fn`` to every item, preserving order.

    Runs inline when a single worker is requested and no executor is given.
    """
    items = list(items)
    if executor is not None:
        return list(executor.map(fn, items))
    if n_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, items))


def tree_reduce(parts):
    """Pairwise-combine a sequence of partial results in a fixed order."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to reduce")
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def chunked_sum(values, chunk=REDUCTION_CHUNK):
    """Sum a 1-D float64 array by fixed-size chunks and a pairwise tree."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return 0.0
    partial = [np.sum(values[i:i + chunk]) for i in range(0, values.size, chunk)]
    return float(tree_reduce(partial))
