import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsiss.exceptions import DimensionError, ParameterError
from hsiss.knn import (KnnParams, filter_probabilities, heap_comparison_bound, knn_classify,
                       nearest_neighbors, neighbor_sets, pixel_distance, window_bounds)

from oracles import knn_full_sort_oracle


class Counter:
    comparisons = 0


def test_window_bounds_examples():
    assert window_bounds(100, 1000, 14) == (93, 106)
    assert window_bounds(0, 1000, 14) == (0, 6)
    assert window_bounds(999, 1000, 14) == (992, 999)
    assert all(window_bounds(r, 5, 14) == (0, 4) for r in range(5))
    assert window_bounds(4, 10, 1) == (4, 4)
    with pytest.raises(ParameterError):
        window_bounds(5, 5, 3)


def test_pixel_distance_examples():
    I = np.zeros((8, 8), dtype=np.float32)
    I[3, 4], I[5, 1] = 0.5, 0.25
    assert pixel_distance(I, 3, 4, 3, 4) == 0
    assert pixel_distance(I, 3, 4, 5, 1, 1.0) == np.float32(13.0625)
    assert pixel_distance(I, 0, 0, 7, 7, 0.0) == 0
    assert pixel_distance(I, 3, 4, 5, 1, 2.0).dtype == np.float32


def test_exhaustive_k_returns_whole_window_self_first(rng):
    I = rng.random((6, 5)).astype(np.float32)
    params = KnnParams(k=3 * 5, lam=1.0, window_rows=3)
    for p in range(5, 25):  # interior rows see a full 3-row window
        nb = nearest_neighbors(I, p, params)
        lo, hi = window_bounds(p // 5, 6, 3)
        assert sorted(nb.tolist()) == list(range(lo * 5, (hi + 1) * 5))
        assert nb[0] == p


def test_constant_image_interior_k5():
    I = np.full((9, 9), 0.3, dtype=np.float32)
    p = 4 * 9 + 4
    nb = nearest_neighbors(I, p, KnnParams(k=5, lam=1.0, window_rows=14))
    assert nb.tolist() == [p, p - 9, p - 1, p + 1, p + 9]


def test_lambda_zero_constant_image_lowest_indices():
    I = np.full((20, 7), 0.5, dtype=np.float32)
    params = KnnParams(k=9, lam=0.0, window_rows=14)
    for p in (0, 70, 139):
        lo, _ = window_bounds(p // 7, 20, 14)
        assert nearest_neighbors(I, p, params).tolist() == list(range(lo * 7, lo * 7 + 9))


@settings(max_examples=40, deadline=None)
@given(rows=st.integers(1, 12), cols=st.integers(1, 12), k=st.integers(1, 12),
       lam=st.sampled_from([0.0, 0.5, 1.0, 4.0]), window=st.integers(1, 15),
       levels=st.sampled_from([0, 3, 1000]), seed=st.integers(0, 2**32 - 1))
def test_heap_matches_full_sort_oracle(rows, cols, k, lam, window, levels, seed):
    rng = np.random.default_rng(seed)
    I = rng.random((rows, cols)).astype(np.float32)
    if levels:
        I = (np.floor(I * levels) / levels).astype(np.float32)
    params = KnnParams(k, lam, window)
    for p in range(rows * cols):
        lo, hi = window_bounds(p // cols, rows, window)
        if (hi - lo + 1) * cols < k:
            with pytest.raises(ParameterError, match=f"row {p // cols}"):
                nearest_neighbors(I, p, params)
            continue
        assert nearest_neighbors(I, p, params).tolist() == knn_full_sort_oracle(I, p, k, lam, window)


def test_oracle_on_32x32_default_params(rng):
    I = rng.random((32, 32)).astype(np.float32)
    params = KnnParams(k=40, lam=1.0, window_rows=14)
    nb = neighbor_sets(I, params)
    for p in range(0, 1024, 3):
        assert nb[p].tolist() == knn_full_sort_oracle(I, p, 40, 1.0, 14)


@pytest.mark.parametrize("k", [1, 2, 5, 40])
def test_comparison_count_bound(rng, k):
    I = rng.random((30, 30)).astype(np.float32)
    params = KnnParams(k=k, lam=1.0, window_rows=14)
    for p in range(0, 900, 11):
        counter = Counter()
        nearest_neighbors(I, p, params, counter=counter)
        lo, hi = window_bounds(p // 30, 30, 14)
        n = (hi - lo + 1) * 30
        assert 0 < counter.comparisons <= heap_comparison_bound(n, k)


@pytest.mark.parametrize("k", [1, 5, 40])
@pytest.mark.parametrize("lam", [0.0, 1.0, 4.0])
def test_engines_agree(rng, k, lam):
    I = rng.random((24, 20)).astype(np.float32)
    I[5:9] = 0.5  # ties
    params = KnnParams(k, lam, 14, 4)
    assert np.array_equal(neighbor_sets(I, params, engine="heap"), neighbor_sets(I, params, engine="select"))


def test_neighbor_set_invariants(rng):
    I = rng.random((20, 16)).astype(np.float32)
    params = KnnParams(10, 1.0, 5, 3)
    nb = neighbor_sets(I, params)
    assert nb.shape == (320, 10)
    for p in range(320):
        assert len(set(nb[p].tolist())) == 10
        lo, hi = window_bounds(p // 16, 20, 5)
        assert nb[p].min() >= lo * 16 and nb[p].max() < (hi + 1) * 16


def test_filter_examples():
    P = np.array([[1.0, 0.0], [0.0, 1.0], [0.3, 0.7]])
    assert filter_probabilities(P, np.array([[0, 1]])).tolist() == [[0.5, 0.5]]
    assert filter_probabilities(P, np.array([[2, 2, 2]]))[0].tolist() == np.float32([0.3, 0.7]).tolist()
    U = np.full((6, 3), 1 / 3)
    O = filter_probabilities(U, np.array([[0, 1, 2], [3, 4, 5]]))
    assert O.tolist() == np.float32(U[:2]).tolist()
    assert O.dtype == np.float32


def test_filter_row_stochastic(rng):
    P = rng.dirichlet(np.ones(4), size=400)
    I = rng.random((20, 20)).astype(np.float32)
    _, O = knn_classify(P, I, KnnParams(k=12, window_rows=6))
    assert np.all(np.abs(O.sum(axis=1) - 1) <= 1e-4)


def test_single_class_map_stays_uniform(rng):
    P = np.zeros((100, 3))
    P[:, 2] = 1
    labels, _ = knn_classify(P, rng.random((10, 10)), KnnParams(k=7, window_rows=4))
    assert (labels == 2).all()


@pytest.mark.parametrize("workers", [1, 3])
def test_batch_and_worker_invariance(rng, workers):
    P = rng.dirichlet(np.ones(3), size=23 * 17)
    I = rng.random((23, 17)).astype(np.float32)
    ref_labels, ref_O = knn_classify(P, I, KnnParams(k=8, batch_rows=23))
    for batch in (1, 4, 10):
        labels, O = knn_classify(P, I, KnnParams(k=8, batch_rows=batch), n_workers=workers)
        assert labels.tobytes() == ref_labels.tobytes() and O.tobytes() == ref_O.tobytes()


def test_two_blob_noise_removed():
    rng = np.random.default_rng(7)
    truth = np.zeros((20, 20), dtype=int)
    truth[:, 10:] = 1
    I = (truth * 0.8 + 0.1 + rng.normal(scale=0.02, size=truth.shape)).astype(np.float32)
    P = np.eye(2)[truth.ravel()]
    flip = rng.random(400) < 0.1
    P[flip] = P[flip][:, ::-1]
    raw = (P.argmax(1) == truth.ravel()).mean()
    labels, _ = knn_classify(P, I, KnnParams(k=9, lam=1.0, window_rows=5))
    assert (labels.ravel() == truth.ravel()).mean() >= raw


def test_argument_errors(rng):
    with pytest.raises(ParameterError):
        KnnParams(k=0)
    with pytest.raises(ParameterError):
        KnnParams(lam=-1)
    with pytest.raises(ParameterError):
        KnnParams(lam=float("nan"))
    with pytest.raises(ParameterError):
        KnnParams(window_rows=0)
    with pytest.raises(ParameterError):
        KnnParams(batch_rows=0)
    with pytest.raises(ParameterError, match="row 0"):
        neighbor_sets(rng.random((10, 3)), KnnParams(k=40, window_rows=14))
    with pytest.raises(DimensionError):
        knn_classify(np.ones((5, 2)), rng.random((3, 3)), KnnParams(k=1))
    with pytest.raises(ParameterError):
        neighbor_sets(rng.random((3, 3)), KnnParams(k=1), engine="kd")
