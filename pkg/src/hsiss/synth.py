"""Deterministic synthetic scenes and analytic SVM models.

Random numbers come from numpy's Philox counter-based generator seeded
with the scene seed. Uniforms are drawn with ``Generator.random`` (binary64
in ``[0, 1)``); Gaussians use the Box-Muller transform on pairs of
uniforms ``(u1, u2)`` as ``sqrt(-2 ln(1 - u1)) * (cos, sin)(2 pi u2)``,
consuming cosine then sine values in order. Per scene the draw order is:
class means (``n_classes * bands`` uniforms, only when means are not
given), then pixel noise in BSQ order.
"""

from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .cube import HsCube, parse_key_values
from .exceptions import ParameterError
from .svm import ClassLabel, SvmModel

# Reference cube geometries (rows, cols, bands) of the clinical database.
DATABASE_GEOMETRIES = {
    "PB1C1": (496, 442, 128),
    "PB2C1": (493, 375, 128),
    "PB3C1": (329, 377, 128),
    "PD1C1": (1000, 1000, 100),
    "PD1C2": (1000, 1000, 100),
    "PD1C3": (1000, 1000, 100),
}

LEGEND = [
    ("tumor", (255, 0, 0)),
    ("healthy", (0, 255, 0)),
    ("hypervascularized", (0, 0, 255)),
    ("background", (0, 0, 0)),
]

_PALETTE = [(255, 255, 0), (255, 0, 255), (0, 255, 255), (255, 128, 0),
            (128, 0, 255), (0, 128, 128), (128, 128, 128), (255, 255, 255)]


def default_classes(n_classes):
    """Class labels for ``n_classes``; four classes get the clinical legend."""
    if n_classes == len(LEGEND):
        return tuple(ClassLabel(i, name, color) for i, (name, color) in enumerate(LEGEND))
    return tuple(ClassLabel(i, f"class{i}", _PALETTE[i % len(_PALETTE)]) for i in range(n_classes))


def make_rng(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


def box_muller(rng, n):
    """``n`` standard normal deviates from ``ceil(n / 2)`` uniform pairs."""
    m = (n + 1) // 2
    u1 = rng.random(m)
    u2 = rng.random(m)
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)]).reshape(-1)[:n]


@dataclass
class SyntheticScene:
    seed: int = 0
    rows: int = 64
    cols: int = 64
    bands: int = 16
    n_classes: int = 4
    sigma: float = 0.05
    means: np.ndarray = None
    blob_grid: tuple = (4, 4)
    image_id: str = field(default="synthetic")

    def __post_init__(self):
        for name in ("rows", "cols", "bands"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_classes < 2 or self.n_classes > 256:
            raise ParameterError(f"n_classes must be in 2..256, got {self.n_classes}")
        if not self.sigma >= 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        gr, gc = self.blob_grid
        if gr < 1 or gc < 1 or gr > self.rows or gc > self.cols:
            raise ParameterError(f"blob_grid {self.blob_grid} does not fit a {self.rows}x{self.cols} image")
        if gr * gc < self.n_classes:
            raise ParameterError(f"blob_grid {self.blob_grid} has fewer blobs than {self.n_classes} classes")
        if self.means is not None:
            means = np.asarray(self.means, dtype=np.float64)
            if means.shape != (self.n_classes, self.bands):
                raise ParameterError(f"means must have shape ({self.n_classes}, {self.bands}), "
                                     f"got {means.shape}")
            _check_distinct(means)
            self.means = means


def _check_distinct(means):
    for a, b in combinations(range(len(means)), 2):
        if np.array_equal(means[a], means[b]):
            raise ParameterError(f"class means {a} and {b} are identical")


def ground_truth(scene):
    """Rectangular blob layout; blob ``(i, j)`` gets class ``(i * (gc + 1) + j) % C``."""
    gr, gc = scene.blob_grid
    row_block = np.searchsorted(np.linspace(0, scene.rows, gr + 1)[1:-1], np.arange(scene.rows), "right")
    col_block = np.searchsorted(np.linspace(0, scene.cols, gc + 1)[1:-1], np.arange(scene.cols), "right")
    return (row_block[:, None] * (gc + 1) + col_block[None, :]) % scene.n_classes


def scene_means(scene, rng=None):
    if scene.means is not None:
        return scene.means
    rng = rng if rng is not None else make_rng(scene.seed)
    means = 0.1 + 0.8 * rng.random((scene.n_classes, scene.bands))
    _check_distinct(means)
    return means


def generate_scene(scene):
    """Return ``(cube, labels)`` where every pixel is its class mean plus noise."""
    rng = make_rng(scene.seed)
    means = scene_means(scene, rng)
    labels = ground_truth(scene)
    n = scene.rows * scene.cols
    bsq = means[labels.reshape(-1)].T
    if scene.sigma > 0:
        bsq = bsq + scene.sigma * box_muller(rng, n * scene.bands).reshape(scene.bands, n)
    cube = HsCube(scene.rows, scene.cols, scene.bands, bsq.astype(np.float32).reshape(-1),
                  image_id=scene.image_id)
    return cube, labels


def analytic_model(means, classes=None):
    """Midpoint hyperplanes between class means.

    For classes ``a < b``: ``w = mu_a - mu_b``, bias ``-w . (mu_a + mu_b) / 2``,
    sigmoid ``A = -4 / max(|w|^2, 1e-12)`` and ``B = 0``.
    """
    means = np.asarray(means, dtype=np.float64)
    if means.ndim != 2 or means.shape[0] < 2:
        raise ParameterError("need a (n_classes >= 2, bands) array of class means")
    _check_distinct(means)
    n_classes = means.shape[0]
    weights, biases, sig_a = [], [], []
    for a, b in combinations(range(n_classes), 2):
        w = means[a] - means[b]
        weights.append(w)
        biases.append(-w @ (means[a] + means[b]) / 2.0)
        sig_a.append(-4.0 / max(float(w @ w), 1e-12))
    classes = classes if classes is not None else default_classes(n_classes)
    return SvmModel(tuple(classes), np.array(weights), np.array(biases), np.array(sig_a),
                    np.zeros(len(weights)))


def corrupt_probabilities(P, fraction, seed):
    """Salt-and-pepper noise: move ``round(fraction * pixels)`` rows to one-hot wrong classes.

    The chosen pixels get all their mass on a class drawn uniformly among
    those other than the row's current argmax.
    """
    P = np.array(P, dtype=np.float64)
    n, n_classes = P.shape
    if not 0 <= fraction <= 1:
        raise ParameterError(f"fraction must be in [0, 1], got {fraction}")
    rng = make_rng(seed)
    hit = rng.permutation(n)[:int(round(fraction * n))]
    current = np.argmax(P[hit], axis=1)
    shift = 1 + rng.integers(0, n_classes - 1, size=hit.size)
    P[hit] = 0.0
    P[hit, (current + shift) % n_classes] = 1.0
    return P


def accuracy(predicted, truth):
    return float(np.mean(np.asarray(predicted).reshape(-1) == np.asarray(truth).reshape(-1)))


# Scene spec files: UTF-8 key=value lines.
#   seed, rows, cols, bands, classes, sigma, blob_rows, blob_cols, image_id
#   means=<C*B comma-separated values, class-major>   (inline), or
#   mean.<k>=<B comma-separated values>              (one line per class)

def parse_scene_spec(text, source="<scene>"):
    fields = parse_key_values(text, source)
    known = {"seed", "rows", "cols", "bands", "classes", "sigma", "blob_rows", "blob_cols",
             "image_id", "means"}

    def as_int(key, default):
        try:
            return int(fields.get(key, default))
        except ValueError:
            raise ParameterError(f"{source}: field {key!r} must be an integer, got {fields[key]!r}") from None

    try:
        sigma = float(fields.get("sigma", 0.05))
    except ValueError:
        raise ParameterError(f"{source}: field 'sigma' must be a number, got {fields['sigma']!r}") from None
    n_classes = as_int("classes", 4)
    bands = as_int("bands", 16)
    means = None
    per_class = {k: v for k, v in fields.items() if k.startswith("mean.")}
    unknown = set(fields) - known - set(per_class)
    if unknown:
        raise ParameterError(f"{source}: unknown fields {sorted(unknown)}")
    try:
        if "means" in fields:
            means = np.array([float(v) for v in fields["means"].split(",")]).reshape(n_classes, bands)
        elif per_class:
            means = np.array([[float(v) for v in per_class[f"mean.{k}"].split(",")]
                              for k in range(n_classes)])
    except KeyError as exc:
        raise ParameterError(f"{source}: missing field {exc.args[0]!r}") from None
    except ValueError:
        raise ParameterError(f"{source}: field 'means' must hold {n_classes}x{bands} numbers") from None
    return SyntheticScene(
        seed=as_int("seed", 0), rows=as_int("rows", 64), cols=as_int("cols", 64), bands=bands,
        n_classes=n_classes, sigma=sigma, means=means,
        blob_grid=(as_int("blob_rows", 4), as_int("blob_cols", 4)),
        image_id=fields.get("image_id", "synthetic"),
    )


def load_scene_spec(path):
    path = Path(path)
    return parse_scene_spec(path.read_text(encoding="utf-8"), str(path))
