"""Spatial-spectral classification of hyperspectral cubes.

A one-vs-one linear SVM produces per-class probability maps, PCA reduces
the cube to a single band, and a windowed K-nearest-neighbour filter over
that band smooths the probabilities before the final argmax.
"""

__version__ = "0.1.0"

from .bench import (FomReport, Foms, PowerTrace, average_power, build_report, compute_foms,
                    emit_report, load_fom_table, load_power_trace, render_report, repetition_stats)
from .cube import HsCube, Layout, convert_layout, load_cube, load_matrix, save_cube, save_matrix
from .estimators import LinearOvoSVM, OneBandPCA, SpatialSpectralClassifier, check_cube
from .exceptions import (ConvergenceError, CubeFormatError, CubeValidationError, DimensionError,
                         HsissError, ModelFormatError, ParameterError)
from .knn import KnnParams, filter_probabilities, knn_classify, nearest_neighbors, neighbor_sets
from .maps import colorize, read_pnm, write_color_map, write_label_map
from .pca import jacobi_eigen, pca_one_band
from .pipeline import PipelineConfig, PipelineResult, StageTimings, run_serial_reference, run_ss_pipeline
from .svm import (ClassLabel, SvmModel, classify_argmax, couple_probabilities, load_model, parse_model,
                  save_model, svm_probability_maps)
from .synth import SyntheticScene, analytic_model, corrupt_probabilities, generate_scene

__all__ = [
    "ClassLabel", "ConvergenceError", "CubeFormatError", "CubeValidationError", "DimensionError",
    "FomReport", "Foms", "HsCube", "HsissError", "KnnParams", "Layout", "LinearOvoSVM",
    "ModelFormatError", "OneBandPCA", "ParameterError", "PipelineConfig", "PipelineResult",
    "PowerTrace", "SpatialSpectralClassifier", "StageTimings", "SvmModel", "SyntheticScene",
    "analytic_model", "average_power", "build_report", "check_cube", "classify_argmax", "colorize",
    "compute_foms", "convert_layout", "corrupt_probabilities", "couple_probabilities", "emit_report",
    "filter_probabilities", "generate_scene", "jacobi_eigen", "knn_classify", "load_cube",
    "load_fom_table", "load_matrix", "load_model", "load_power_trace", "nearest_neighbors",
    "neighbor_sets", "parse_model", "pca_one_band", "read_pnm", "render_report", "repetition_stats",
    "run_serial_reference", "run_ss_pipeline", "save_cube", "save_matrix", "save_model",
    "svm_probability_maps", "write_color_map", "write_label_map",
]
