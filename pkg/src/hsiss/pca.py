"""One-band reduction of a cube through its first principal component.

Steps: remove each band's mean, form the population covariance, diagonalise
it with the classical (largest pivot) Jacobi method, project onto the
leading eigenvector and min-max scale the scores to ``[0, 1]``.

All arithmetic runs in binary64. Means and covariance entries use
fixed-size chunks combined by a pairwise tree, so results are identical for
any worker count.
"""

from dataclasses import dataclass

import numpy as np

from ._parallel import REDUCTION_CHUNK, chunked_sum, parallel_map, tree_reduce
from .exceptions import ConvergenceError, DimensionError

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class EigenPairs:
    """Eigenvalues in descending order; ``vectors[:, i]`` pairs with ``values[i]``."""

    values: np.ndarray
    vectors: np.ndarray
    rotations: int = 0


def _pixels64(cube):
    pixel_matrix = getattr(cube, "pixel_matrix", None)
    x = pixel_matrix() if pixel_matrix is not None else np.asarray(cube)
    if x.ndim == 3:
        x = x.reshape(-1, x.shape[-1])
    if x.ndim != 2:
        raise DimensionError(f"expected pixels x bands samples, got shape {x.shape}")
    return np.asarray(x, dtype=np.float64)


def band_means(cube, n_workers=1, executor=None):
    x = _pixels64(cube)
    n = x.shape[0]
    sums = parallel_map(lambda b: chunked_sum(x[:, b]), range(x.shape[1]), n_workers, executor)
    return np.array(sums) / n


def center_bands(cube, n_workers=1, executor=None):
    """Return ``(centered, means)`` with ``centered`` as ``(pixels, bands)`` binary64."""
    x = _pixels64(cube)
    means = band_means(x, n_workers, executor)
    return x - means, means


def covariance(centered, n_workers=1, executor=None):
    """Population covariance of already-centred pixels.

    Each chunk of ``REDUCTION_CHUNK`` pixels contributes a Gram matrix; the
    chunk matrices are tree-combined, divided by the pixel count, and the
    upper triangle is mirrored so the result is exactly symmetric.
    """
    x = _pixels64(centered)
    n = x.shape[0]
    spans = [(s, min(s + REDUCTION_CHUNK, n)) for s in range(0, n, REDUCTION_CHUNK)]
    parts = parallel_map(lambda s: x[s[0]:s[1]].T @ x[s[0]:s[1]], spans, n_workers, executor)
    cov = tree_reduce(parts) / n
    upper = np.triu(cov)
    return upper + np.triu(cov, 1).T


def _fix_signs(vectors):
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def jacobi_eigen(m, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by classical Jacobi rotations.

    Each rotation zeroes the off-diagonal entry of largest magnitude. The
    loop stops once every off-diagonal entry is below
    ``tol * max(1, max|diag|)``; it raises :class:`ConvergenceError` after
    ``max_sweeps * n(n-1)/2`` rotations.
    """
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    n = a.shape[0]
    v = np.eye(n)
    budget = max_sweeps * n * (n - 1) // 2
    rotations = 0
    off_mask = ~np.eye(n, dtype=bool)
    while n > 1:
        off = np.where(off_mask, np.abs(a), 0.0)
        flat = int(np.argmax(off))
        p, q = divmod(flat, n)
        if p > q:
            p, q = q, p
        if off[p, q] < tol * max(1.0, np.max(np.abs(np.diag(a)))):
            break
        if rotations >= budget:
            raise ConvergenceError(
                f"Jacobi did not converge in {budget} rotations",
                float(np.sqrt(np.sum(off ** 2))))
        apq = a[p, q]
        theta = (a[q, q] - a[p, p]) / (2.0 * apq)
        t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
        c = 1.0 / np.sqrt(t * t + 1.0)
        s = t * c
        app, aqq = a[p, p], a[q, q]
        ap = a[:, p].copy()
        aq = a[:, q].copy()
        a[:, p] = c * ap - s * aq
        a[:, q] = s * ap + c * aq
        a[p, :] = a[:, p]
        a[q, :] = a[:, q]
        a[p, p] = app - t * apq
        a[q, q] = aqq + t * apq
        a[p, q] = a[q, p] = 0.0
        vp = v[:, p].copy()
        vq = v[:, q].copy()
        v[:, p] = c * vp - s * vq
        v[:, q] = s * vp + c * vq
        rotations += 1
    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    return EigenPairs(values[order], _fix_signs(v[:, order]), rotations)


def project_first_pc(centered, pairs):
    """Scores of every pixel on the leading eigenvector (bands summed left to right)."""
    x = _pixels64(centered)
    v1 = np.asarray(pairs.vectors if isinstance(pairs, EigenPairs) else pairs, dtype=np.float64)
    if v1.ndim == 2:
        v1 = v1[:, 0]
    if v1.shape[0] != x.shape[1]:
        raise DimensionError(f"eigenvector length {v1.shape[0]} != band count {x.shape[1]}")
    score = np.zeros(x.shape[0])
    for b in range(x.shape[1]):
        score += x[:, b] * v1[b]
    return score


def normalize_one_band(scores, rows=None, cols=None):
    """Min-max scale scores to ``[0, 1]``; a constant input maps to zeros."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    lo, hi = s.min(), s.max()
    out = np.zeros_like(s) if hi == lo else (s - lo) / (hi - lo)
    if rows is not None and cols is not None:
        return out.reshape(rows, cols)
    return out


@dataclass(frozen=True, eq=False)
class PcaResult:
    image: np.ndarray
    means: np.ndarray
    covariance: np.ndarray
    eigen: EigenPairs


def pca_one_band(cube, n_workers=1, executor=None, full_output=False):
    """Normalised first-component image, shaped ``(rows, cols)`` for cubes."""
    centered, means = center_bands(cube, n_workers, executor)
    cov = covariance(centered, n_workers, executor)
    eigen = jacobi_eigen(cov)
    image = normalize_one_band(project_first_pc(centered, eigen))
    if hasattr(cube, "rows"):
        image = image.reshape(cube.rows, cube.cols)
    if full_output:
        return PcaResult(image, means, cov, eigen)
    return image
