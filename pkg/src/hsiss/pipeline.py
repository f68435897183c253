"""Stage orchestration: PCA and SVM side by side, then the KNN filter.

The concurrent schedule and the serial reference run the same functions on
the same fixed work partitions, so their outputs agree bit for bit.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._parallel import resolve_workers
from .cube import HsCube, save_cube, save_matrix
from .exceptions import DimensionError, ParameterError
from .knn import KnnParams, knn_classify
from .pca import pca_one_band
from .svm import classify_argmax, svm_probability_maps

logger = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    n_workers: int = 0
    knn: KnnParams = field(default_factory=KnnParams)
    serial_reference: bool = False
    dump_intermediates: bool = False
    dump_dir: Path = None
    dump_pca: bool = False
    dump_neighbors: bool = False
    repetitions: int = 20

    def __post_init__(self):
        if self.repetitions < 1:
            raise ParameterError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.n_workers < 0:
            raise ParameterError(f"worker count must be >= 0, got {self.n_workers}")
        if (self.dump_intermediates or self.dump_pca or self.dump_neighbors) and self.dump_dir is None:
            raise ParameterError("a dump directory is required when dumps are enabled")


@dataclass
class StageTimings:
    """Wall-clock seconds per stage for one run (monotonic clock)."""

    svm: float = 0.0
    pca: float = 0.0
    knn: float = 0.0
    io_and_setup: float = 0.0
    total: float = 0.0

    def as_dict(self):
        return {"svm": self.svm, "pca": self.pca, "knn": self.knn,
                "io_and_setup": self.io_and_setup, "total": self.total}


@dataclass(eq=False)
class PipelineResult:
    labels: np.ndarray
    filtered: np.ndarray
    one_band: np.ndarray
    raw: np.ndarray
    timings: StageTimings
    svm_labels: np.ndarray = None


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def _write_text_matrix(path, matrix, fmt="%.17g"):
    np.savetxt(path, np.atleast_2d(matrix), fmt=fmt)


def _dump(result, pca_full, nbrs, cube, config):
    out = Path(config.dump_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.dump_intermediates:
        image = HsCube(cube.rows, cube.cols, 1, result.one_band.reshape(-1), image_id=cube.image_id)
        save_cube(image, out / "one_band.hdr", out / "one_band.raw")
        save_matrix(result.raw, out / "prob_raw.hdr", out / "prob_raw.raw", role="raw")
        save_matrix(result.filtered, out / "prob_filtered.hdr", out / "prob_filtered.raw", role="filtered")
    if config.dump_pca and pca_full is not None:
        _write_text_matrix(out / "band_means.txt", pca_full.means)
        _write_text_matrix(out / "covariance.txt", pca_full.covariance)
        _write_text_matrix(out / "eigenvalues.txt", pca_full.eigen.values)
    if config.dump_neighbors and nbrs is not None:
        np.savetxt(out / "neighbors.txt", nbrs, fmt="%d")


def _validate(cube, model):
    if cube.bands != model.bands:
        raise DimensionError(f"cube has {cube.bands} bands, model expects {model.bands}")


def _finish(cube, model, config, P, pca_full, t_svm, t_pca, pool, n_workers, t0, setup, stage_hook):
    if stage_hook is not None:
        stage_hook("knn")
    (labels, O, nbrs), t_knn = _timed(knn_classify, P, pca_full.image, config.knn,
                                      n_workers=n_workers,
                                      executor=pool, return_neighbors=True)
    ids = model.class_ids
    result = PipelineResult(ids[labels], O, pca_full.image, P,
                            StageTimings(svm=t_svm, pca=t_pca, knn=t_knn),
                            svm_labels=ids[classify_argmax(P)].reshape(cube.rows, cube.cols))
    dump_start = time.perf_counter()
    if config.dump_intermediates or config.dump_pca or config.dump_neighbors:
        _dump(result, pca_full, nbrs, cube, config)
    setup += time.perf_counter() - dump_start
    result.timings.io_and_setup = setup
    result.timings.total = time.perf_counter() - t0
    return result


def run_serial_reference(cube, model, config=None, stage_hook=None):
    """Single-worker, straight-line execution of the full pipeline."""
    config = config or PipelineConfig()
    t0 = time.perf_counter()
    _validate(cube, model)
    setup = time.perf_counter() - t0
    if stage_hook is not None:
        stage_hook("pca")
    pca_full, t_pca = _timed(pca_one_band, cube, full_output=True)
    if stage_hook is not None:
        stage_hook("svm")
    P, t_svm = _timed(svm_probability_maps, cube, model)
    return _finish(cube, model, config, P, pca_full, t_svm, t_pca, None, 1, t0, setup, stage_hook)


def run_ss_pipeline(cube, model, config=None, stage_hook=None):
    """Classify ``cube`` with ``model``; PCA and SVM run concurrently.

    ``stage_hook`` (optional) is called with the stage name as each stage
    starts; tests use it to inject delays. KNN starts only after both
    earlier stages have returned.
    """
    config = config or PipelineConfig()
    if config.serial_reference:
        return run_serial_reference(cube, model, config, stage_hook)
    t0 = time.perf_counter()
    _validate(cube, model)
    n_workers = resolve_workers(config.n_workers)
    pool = ThreadPoolExecutor(max_workers=n_workers, thread_name_prefix="hsiss-data")
    stages = ThreadPoolExecutor(max_workers=2, thread_name_prefix="hsiss-stage")
    setup = time.perf_counter() - t0
    try:
        def stage(name, fn, *args, **kwargs):
            if stage_hook is not None:
                stage_hook(name)
            return _timed(fn, *args, **kwargs)

        pca_future = stages.submit(stage, "pca", pca_one_band, cube, n_workers=n_workers,
                                   executor=pool, full_output=True)
        svm_future = stages.submit(stage, "svm", svm_probability_maps, cube, model,
                                   n_workers=n_workers, executor=pool)
        pca_full, t_pca = pca_future.result()
        P, t_svm = svm_future.result()
        return _finish(cube, model, config, P, pca_full, t_svm, t_pca, pool, n_workers, t0, setup,
                       stage_hook)
    finally:
        stages.shutdown(wait=True)
        pool.shutdown(wait=True)
