import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsiss._parallel import chunked_sum, split_range, tree_reduce
from hsiss.cube import HsCube
from hsiss.exceptions import ConvergenceError, DimensionError
from hsiss.pca import (EigenPairs, band_means, center_bands, covariance, jacobi_eigen, normalize_one_band,
                       pca_one_band, project_first_pc)


def naive_covariance(x):
    n, bands = x.shape
    mean = [sum(float(x[p, b]) for p in range(n)) / n for b in range(bands)]
    cov = np.zeros((bands, bands))
    for a in range(bands):
        for b in range(bands):
            cov[a, b] = sum((float(x[p, a]) - mean[a]) * (float(x[p, b]) - mean[b]) for p in range(n)) / n
    return cov


def test_centering_examples():
    x = np.array([[1.0, 3.5], [2.0, 3.5], [3.0, 3.5]])
    centered, means = center_bands(x)
    assert means.tolist() == [2.0, 3.5]
    assert centered.tolist() == [[-1, 0], [0, 0], [1, 0]]
    again, _ = center_bands(centered)
    np.testing.assert_allclose(again, centered, atol=1e-6)


def test_covariance_hand_example():
    cov = covariance(np.array([[-1.0, -2.0], [1.0, 2.0]]))
    assert cov.tolist() == [[1, 2], [2, 4]]
    assert not covariance(np.zeros((5, 3))).any()


def test_covariance_matches_naive_oracle(rng):
    cube = HsCube.from_array(rng.random((16, 16, 6), dtype=np.float32))
    centered, _ = center_bands(cube)
    cov = covariance(centered)
    want = naive_covariance(cube.pixel_matrix())
    np.testing.assert_allclose(cov, want, rtol=1e-6, atol=1e-12)
    assert np.array_equal(cov, cov.T)


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_reductions_independent_of_workers(rng, workers):
    x = rng.random((3 * 4096 + 17, 5))
    c1, m1 = center_bands(x, 1)
    cw, mw = center_bands(x, workers)
    assert m1.tobytes() == mw.tobytes()
    assert covariance(c1, 1).tobytes() == covariance(cw, workers).tobytes()


def test_parallel_helpers():
    assert split_range(10, 3) == [(0, 3), (3, 6), (6, 10)]
    assert split_range(2, 5) == [(0, 1), (1, 2)]
    assert tree_reduce([1, 2, 3, 4, 5]) == 15
    v = np.arange(10000, dtype=np.float64) * 0.1
    assert chunked_sum(v) == chunked_sum(v.copy())
    assert abs(chunked_sum(v) - v.sum()) < 1e-6
    with pytest.raises(ValueError):
        tree_reduce([])


def test_jacobi_diagonal():
    eig = jacobi_eigen(np.diag([5.0, 2.0, 9.0]))
    assert eig.values.tolist() == [9, 5, 2]
    assert eig.rotations == 0
    assert np.array_equal(eig.vectors, np.eye(3)[:, [2, 0, 1]])


def test_jacobi_two_by_two():
    eig = jacobi_eigen([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(eig.values, [3, 1], atol=1e-14)
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(eig.vectors[:, 0], [s, s], atol=1e-14)
    # (1, -1) and (-1, 1) tie on magnitude; the first component wins
    np.testing.assert_allclose(eig.vectors[:, 1], [s, -s], atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_jacobi_properties(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n))
    a = (m + m.T) / 2
    eig = jacobi_eigen(a)
    v, lam = eig.vectors, eig.values
    assert np.all(np.diff(lam) <= 0)
    np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-8)
    assert abs(lam.sum() - np.trace(a)) <= 1e-8 * max(1.0, np.abs(a).sum())
    for i in range(n):
        assert np.linalg.norm(a @ v[:, i] - lam[i] * v[:, i]) <= 1e-6 * np.linalg.norm(a)
        col = v[:, i]
        assert col[np.argmax(np.abs(col))] > 0
    np.testing.assert_allclose(lam, np.linalg.eigvalsh(a)[::-1], atol=1e-8 * max(1, np.abs(lam).max()))


def test_jacobi_budget_exhaustion(rng):
    m = rng.normal(size=(6, 6))
    with pytest.raises(ConvergenceError) as info:
        jacobi_eigen(m + m.T, max_sweeps=0)
    assert info.value.off_diagonal_norm > 0
    assert info.value.kind == "convergence"


def test_jacobi_rejects_bad_input():
    with pytest.raises(DimensionError):
        jacobi_eigen(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        jacobi_eigen([[np.nan, 0], [0, 1]])


def test_projection_examples():
    c = np.array([[1.0, 1.0], [0.0, 2.0]])
    assert project_first_pc(c, np.array([0.0, 1.0])).tolist() == [1.0, 2.0]
    s = 1 / np.sqrt(2)
    assert project_first_pc(np.array([[1.0, 1.0]]), np.array([s, s]))[0] == pytest.approx(np.sqrt(2))
    with pytest.raises(DimensionError):
        project_first_pc(c, np.ones(3))


def test_projection_reproduces_cov_direction(rng):
    x = rng.normal(size=(500, 4)) @ rng.normal(size=(4, 4))
    c, _ = center_bands(x)
    cov = covariance(c)
    eig = jacobi_eigen(cov)
    s = project_first_pc(c, eig)
    corr = c.T @ s / len(s)  # equals Cov v1 = lambda1 v1
    np.testing.assert_allclose(corr / np.linalg.norm(corr), eig.vectors[:, 0], atol=1e-5)


def test_normalization():
    assert normalize_one_band([-1.0, 0.0, 1.0]).tolist() == [0, 0.5, 1]
    assert normalize_one_band([4.0, 4.0]).tolist() == [0, 0]
    assert normalize_one_band(np.arange(6.0), 2, 3).shape == (2, 3)


def test_rank_one_cube(rng):
    # dyadic factors keep every product exact in binary32
    t = rng.permutation(64) / 64.0
    u = np.array([1, 3, 5, 2, 7]) / 8.0
    cube = HsCube.from_array(np.outer(t, u).reshape(8, 8, 5))
    image = pca_one_band(cube)
    assert image.shape == (8, 8)
    rho = np.corrcoef(image.ravel(), t)[0, 1]
    assert abs(abs(rho) - 1) < 1e-9
    assert image.min() == 0 and image.max() == 1


def test_offset_invariance(rng):
    arr = rng.random((12, 12, 6), dtype=np.float32)
    a = pca_one_band(HsCube.from_array(arr))
    b = pca_one_band(HsCube.from_array(arr + np.arange(6, dtype=np.float32) * 0.25))
    np.testing.assert_allclose(a, b, atol=1e-5)


@pytest.mark.parametrize("bands", [100, 128])
def test_covariance_shape_for_database_band_counts(rng, bands):
    cube = HsCube.from_array(rng.random((6, 5, bands), dtype=np.float32))
    full = pca_one_band(cube, full_output=True)
    assert full.covariance.shape == (bands, bands)
    assert isinstance(full.eigen, EigenPairs)
    assert np.all((full.image >= 0) & (full.image <= 1))


def test_band_means_worker_invariant(rng):
    x = rng.random((10000, 3))
    assert band_means(x, 1).tobytes() == band_means(x, 4).tobytes()
