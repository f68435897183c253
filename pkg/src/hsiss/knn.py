"""Windowed K-nearest-neighbour filtering of probability maps.

For each pixel the candidates are all pixels of a band of ``window_rows``
image rows around it (full width, clipped at the image border, the pixel
itself included). The distance between pixels ``(r, c)`` and ``(i, j)`` of
the one-band image ``I`` is::

    (I[r, c] - I[i, j])**2 + lam * ((r - i)**2 + (c - j)**2)

evaluated in binary32. The K closest candidates are kept, ties going to the
lower flat index, and the filtered map is the mean of their probability
rows.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .exceptions import DimensionError, ParameterError

DEFAULT_K = 40
DEFAULT_LAMBDA = 1.0
DEFAULT_WINDOW_ROWS = 14
DEFAULT_BATCH_ROWS = 10

_KEY_BUFFER = 1 << 22
_LOW32 = np.uint64(0xFFFFFFFF)


@dataclass(frozen=True)
class KnnParams:
    k: int = DEFAULT_K
    lam: float = DEFAULT_LAMBDA
    window_rows: int = DEFAULT_WINDOW_ROWS
    batch_rows: int = DEFAULT_BATCH_ROWS

    def __post_init__(self):
        if int(self.k) < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ParameterError(f"lambda must be a finite value >= 0, got {self.lam}")
        if int(self.window_rows) < 1:
            raise ParameterError(f"window_rows must be >= 1, got {self.window_rows}")
        if int(self.batch_rows) < 1:
            raise ParameterError(f"batch_rows must be >= 1, got {self.batch_rows}")


def window_bounds(r, rows, window_rows):
    """Inclusive ``(first, last)`` rows of the search window for row ``r``."""
    if not 0 <= r < rows:
        raise ParameterError(f"row {r} outside image of {rows} rows")
    above = -(-(window_rows - 1) // 2)
    below = (window_rows - 1) // 2
    return max(0, r - above), min(rows - 1, r + below)


def pixel_distance(image, r, c, i, j, lam=DEFAULT_LAMBDA):
    """Binary32 spatial-spectral distance between pixels ``(r, c)`` and ``(i, j)``."""
    image = np.asarray(image, dtype=np.float32)
    diff = image[r, c] - image[i, j]
    spatial = np.float32((r - i) * (r - i) + (c - j) * (c - j))
    return diff * diff + np.float32(lam) * spatial


def _check_window(rows, cols, params):
    for r in range(rows):
        first, last = window_bounds(r, rows, params.window_rows)
        count = (last - first + 1) * cols
        if count < params.k:
            raise ParameterError(f"row {r}: search window holds {count} pixels, fewer than k={params.k}")


class _Counter:
    __slots__ = ("comparisons",)

    def __init__(self):
        self.comparisons = 0


def _sift_down(heap, start, size, counter):
    # max-heap on (distance, index) tuples
    item = heap[start]
    pos = start
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and heap[child + 1] > heap[child]:
            child += 1
        counter.comparisons += 1
        if heap[child] > item:
            heap[pos] = heap[child]
            pos = child
        else:
            break
    heap[pos] = item


def nearest_neighbors(image, p, params, counter=None):
    """Flat indices of the ``k`` nearest window pixels of pixel ``p``.

    Uses an online partial heapsort: the first ``k`` candidates form a
    max-heap, each further candidate replaces the root only when it is
    strictly closer. Pass a ``counter`` (any object with an integer
    ``comparisons`` attribute) to count candidate comparisons.
    """
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 2:
        raise DimensionError(f"expected a (rows, cols) image, got shape {image.shape}")
    rows, cols = image.shape
    r, c = divmod(int(p), cols)
    first, last = window_bounds(r, rows, params.window_rows)
    n = (last - first + 1) * cols
    if n < params.k:
        raise ParameterError(f"row {r}: search window holds {n} pixels, fewer than k={params.k}")
    counter = counter if counter is not None else _Counter()
    start = first * cols
    # binary32 distances of every window candidate, in flat-index order
    window = image[first:last + 1].reshape(-1)
    dr = np.repeat(np.arange(first, last + 1) - r, cols)
    dc = np.tile(np.arange(cols) - c, last - first + 1)
    diff = image[r, c] - window
    dist = (diff * diff + np.float32(params.lam) * (dr * dr + dc * dc).astype(np.float32)).tolist()

    k = params.k
    heap = [(dist[i], start + i) for i in range(k)]
    for pos in range(k // 2 - 1, -1, -1):
        _sift_down(heap, pos, k, counter)
    for i in range(k, n):
        item = (dist[i], start + i)
        counter.comparisons += 1
        if item < heap[0]:
            heap[0] = item
            _sift_down(heap, 0, k, counter)
    for end in range(k - 1, 0, -1):
        heap[0], heap[end] = heap[end], heap[0]
        _sift_down(heap, 0, end, _Counter())
    return np.array([idx for _, idx in heap], dtype=np.int64)


def heap_comparison_bound(n, k):
    """Upper bound on candidate comparisons for ``n`` window candidates."""
    return n + n * math.ceil(math.log2(k)) if k > 1 else n


def _row_neighbors(image32, r, params):
    rows, cols = image32.shape
    first, last = window_bounds(r, rows, params.window_rows)
    cand = np.arange(first * cols, (last + 1) * cols, dtype=np.int64)
    cand_val = image32.reshape(-1)[cand]
    dr = (cand // cols - r).astype(np.int64)
    cand_c = cand % cols
    lam = np.float32(params.lam)
    k = params.k
    out = np.empty((cols, k), dtype=np.int64)
    step = max(1, _KEY_BUFFER // cand.size)
    for cs in range(0, cols, step):
        ce = min(cols, cs + step)
        cc = np.arange(cs, ce)
        diff = image32[r, cs:ce, None] - cand_val[None, :]
        dc = cand_c[None, :] - cc[:, None]
        spatial = (dr[None, :] * dr[None, :] + dc * dc).astype(np.float32)
        dist = diff * diff + lam * spatial
        keys = (dist.view(np.uint32).astype(np.uint64) << np.uint64(32)) | cand.astype(np.uint64)
        if k < cand.size:
            keys = np.take_along_axis(keys, np.argpartition(keys, k - 1, axis=1)[:, :k], axis=1)
        keys.sort(axis=1)
        out[cs:ce] = (keys & _LOW32).astype(np.int64)
    return out


def _row_batches(rows, batch_rows):
    return [(s, min(rows, s + batch_rows)) for s in range(0, rows, batch_rows)]


def neighbor_sets(image, params, n_workers=1, executor=None, engine="select"):
    """``(pixels, k)`` neighbour indices in ascending-distance order.

    Rows are handled in batches of ``params.batch_rows``; batches are
    distributed across workers. ``engine="heap"`` runs the instrumented
    per-pixel heap selection instead of the vectorised one (same result,
    much slower).
    """
    image32 = np.asarray(image, dtype=np.float32)
    if image32.ndim != 2:
        raise DimensionError(f"expected a (rows, cols) image, got shape {image32.shape}")
    rows, cols = image32.shape
    _check_window(rows, cols, params)

    if engine == "select":
        def batch(span):
            return np.concatenate([_row_neighbors(image32, r, params) for r in range(*span)])
    elif engine == "heap":
        def batch(span):
            return np.stack([nearest_neighbors(image32, p, params)
                             for p in range(span[0] * cols, span[1] * cols)])
    else:
        raise ParameterError(f"unknown neighbour engine {engine!r}")
    return np.concatenate(parallel_map(batch, _row_batches(rows, params.batch_rows),
                                       n_workers, executor))


def filter_probabilities(P, neighbors):
    """Mean probability row over each pixel's neighbours.

    Accumulates in binary64 in neighbour order, then casts to binary32.
    """
    P64 = np.asarray(P, dtype=np.float64)
    neighbors = np.asarray(neighbors)
    k = neighbors.shape[1]
    acc = np.zeros((neighbors.shape[0], P64.shape[1]))
    for j in range(k):
        acc += P64[neighbors[:, j]]
    return (acc / k).astype(np.float32)


def knn_classify(P, image, params, n_workers=1, executor=None, engine="select",
                 return_neighbors=False):
    """Filter ``P`` with the windowed KNN and relabel by argmax.

    Returns ``(labels, O)``: ``labels`` is a ``(rows, cols)`` array of class
    positions and ``O`` the filtered ``(pixels, C)`` map. With
    ``return_neighbors`` the neighbour matrix is appended.
    """
    image = np.asarray(image)
    P = np.asarray(P)
    if image.ndim != 2:
        raise DimensionError(f"expected a (rows, cols) image, got shape {image.shape}")
    if P.shape[0] != image.size:
        raise DimensionError(f"probability map has {P.shape[0]} rows, image has {image.size} pixels")
    rows, cols = image.shape
    nbrs = neighbor_sets(image, params, n_workers, executor, engine)
    spans = [(s * cols, e * cols) for s, e in _row_batches(rows, params.batch_rows)]
    O = np.concatenate(parallel_map(lambda s: filter_probabilities(P, nbrs[s[0]:s[1]]),
                                    spans, n_workers, executor))
    labels = np.argmax(O, axis=1).reshape(rows, cols)
    if return_neighbors:
        return labels, O, nbrs
    return labels, O
