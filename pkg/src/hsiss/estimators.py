"""scikit-learn style estimators wrapping the pipeline stages.

``LinearOvoSVM`` and ``OneBandPCA`` work on ``(n_pixels, n_bands)``
matrices like any sklearn estimator. ``SpatialSpectralClassifier`` needs
the spatial layout, so it takes ``(rows, cols, bands)`` arrays or
:class:`~hsiss.cube.HsCube` objects.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .cube import HsCube
from .exceptions import DimensionError
from .knn import (DEFAULT_BATCH_ROWS, DEFAULT_K, DEFAULT_LAMBDA, DEFAULT_WINDOW_ROWS, KnnParams,
                  knn_classify)
from .pca import EigenPairs, center_bands, covariance, jacobi_eigen, normalize_one_band, project_first_pc
from .pipeline import PipelineConfig, run_ss_pipeline
from .svm import ClassLabel, classify_argmax, decision_values, svm_probability_maps
from .synth import analytic_model, default_classes


def check_cube(X):
    """Validate a cube-shaped input and return it as an :class:`HsCube`."""
    if isinstance(X, HsCube):
        return X
    X = check_array(X, allow_nd=True, dtype=np.float32, ensure_all_finite=True)
    if X.ndim != 3:
        raise DimensionError(f"expected a (rows, cols, bands) array, got shape {X.shape}")
    return HsCube.from_array(X)


def check_probability_maps(P, n_classes=None):
    P = check_array(P, dtype=np.float64)
    if n_classes is not None and P.shape[1] != n_classes:
        raise DimensionError(f"expected {n_classes} probability columns, got {P.shape[1]}")
    if np.any(P < 0) or np.any(P > 1) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-4):
        raise ValueError("probability rows must lie in [0, 1] and sum to 1")
    return P


class LinearOvoSVM(ClassifierMixin, BaseEstimator):
    """Pixel-wise one-vs-one linear SVM with coupled probability output.

    Parameters
    ----------
    model : SvmModel, optional
        Pre-trained hyperplanes. When omitted, ``fit`` builds midpoint
        hyperplanes between the class means of the training pixels.
    n_workers : int
        Worker threads for inference.
    """

    def __init__(self, model=None, n_workers=1):
        self.model = model
        self.n_workers = n_workers

    def fit(self, X, y=None):
        if self.model is not None:
            X = check_array(X, dtype=np.float32)
            if X.shape[1] != self.model.bands:
                raise DimensionError(f"X has {X.shape[1]} bands, model expects {self.model.bands}")
            self.model_ = self.model
        else:
            X, y = check_X_y(X, y, dtype=np.float64)
            classes = np.unique(y)
            means = np.stack([X[y == c].mean(axis=0) for c in classes])
            labels = None
            if np.issubdtype(classes.dtype, np.integer) and classes.min() >= 0 and classes.max() <= 255:
                defaults = default_classes(len(classes))
                labels = tuple(ClassLabel(int(c), d.name, d.color) for c, d in zip(classes, defaults))
            self.model_ = analytic_model(means, labels)
        self.classes_ = self.model_.class_ids
        self.n_features_in_ = self.model_.bands
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return decision_values(check_array(X, dtype=np.float32), self.model_)

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return svm_probability_maps(check_array(X, dtype=np.float32), self.model_, self.n_workers)

    def predict(self, X):
        return self.classes_[classify_argmax(self.predict_proba(X))]


class OneBandPCA(TransformerMixin, BaseEstimator):
    """First principal component scaled to ``[0, 1]`` over the fitted data.

    Attributes
    ----------
    mean_ : ndarray of shape (n_bands,)
    covariance_ : ndarray of shape (n_bands, n_bands)
    eigenvalues_ : ndarray of shape (n_bands,)
    components_ : ndarray of shape (1, n_bands)
    """

    def __init__(self, n_workers=1):
        self.n_workers = n_workers

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        centered, self.mean_ = center_bands(X, self.n_workers)
        self.covariance_ = covariance(centered, self.n_workers)
        eig = jacobi_eigen(self.covariance_)
        self.eigenvalues_ = eig.values
        self.components_ = eig.vectors[:, :1].T
        scores = project_first_pc(centered, eig)
        self.score_range_ = (float(scores.min()), float(scores.max()))
        self.n_features_in_ = X.shape[1]
        return self

    def _raw_scores(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"X has {X.shape[1]} bands, fitted on {self.n_features_in_}")
        return project_first_pc(X - self.mean_, self.components_[0])

    def transform(self, X):
        s = self._raw_scores(X)
        lo, hi = self.score_range_
        out = np.zeros_like(s) if hi == lo else (s - lo) / (hi - lo)
        return out[:, None]

    def fit_transform(self, X, y=None):
        self.fit(X)
        centered = check_array(X, dtype=np.float64) - self.mean_
        eig = EigenPairs(self.eigenvalues_, self.components_.T)
        return normalize_one_band(project_first_pc(centered, eig))[:, None]


class SpatialSpectralClassifier(ClassifierMixin, BaseEstimator):
    """SVM probabilities refined by the windowed KNN filter over the PCA image.

    ``fit`` accepts a cube plus an optional ``(rows, cols)`` label map; with
    a pre-trained ``model`` the labels are ignored. ``predict`` returns a
    ``(rows, cols)`` map of class ids.
    """

    def __init__(self, model=None, k=DEFAULT_K, lam=DEFAULT_LAMBDA, window_rows=DEFAULT_WINDOW_ROWS,
                 batch_rows=DEFAULT_BATCH_ROWS, n_workers=1):
        self.model = model
        self.k = k
        self.lam = lam
        self.window_rows = window_rows
        self.batch_rows = batch_rows
        self.n_workers = n_workers

    def _params(self):
        return KnnParams(self.k, self.lam, self.window_rows, self.batch_rows)

    def fit(self, X, y=None):
        cube = check_cube(X)
        pixels = cube.pixel_matrix()
        labels = None if y is None else np.asarray(y).reshape(-1)
        self.svm_ = LinearOvoSVM(self.model, self.n_workers).fit(pixels, labels)
        self.classes_ = self.svm_.classes_
        self.n_features_in_ = cube.bands
        self._params()
        return self

    def _run(self, X):
        check_is_fitted(self, "svm_")
        cube = check_cube(X)
        config = PipelineConfig(n_workers=self.n_workers, knn=self._params())
        return run_ss_pipeline(cube, self.svm_.model_, config)

    def predict(self, X):
        return self._run(X).labels

    def predict_proba(self, X):
        cube = check_cube(X)
        return self._run(cube).filtered.reshape(cube.rows, cube.cols, -1)

    def filter(self, P, one_band):
        """Apply only the KNN stage to an existing probability map and one-band image."""
        P = check_probability_maps(P)
        labels, O = knn_classify(P, np.asarray(one_band), self._params(), self.n_workers)
        return labels, O

    def score(self, X, y, sample_weight=None):
        pred = self.predict(X).reshape(-1)
        return float(np.average(pred == np.asarray(y).reshape(-1), weights=sample_weight))
