"""Pixel-wise one-vs-one linear SVM probability inference.

The chain is: hyperplane decision values, a per-pair sigmoid giving
binary probabilities, pairwise coupling into one class-probability vector
per pixel, and an argmax for the preliminary label.
"""

from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from ._parallel import parallel_map
from .exceptions import DimensionError, ModelFormatError, ParameterError

PROB_EPS = 1e-7
EXP_CLIP = 500.0
PIXEL_BLOCK = 16384


@dataclass(frozen=True)
class ClassLabel:
    id: int
    name: str
    color: tuple


@dataclass(frozen=True, eq=False)
class SvmModel:
    """One-vs-one hyperplanes with their sigmoid parameters.

    Pair ``k`` separates class positions ``pairs[k] = (a, b)`` with ``a < b``
    in lexicographic order. ``weights`` has shape ``(n_pairs, bands)``.
    """

    classes: tuple
    weights: np.ndarray
    biases: np.ndarray
    sigmoid_a: np.ndarray
    sigmoid_b: np.ndarray

    def __post_init__(self):
        classes = tuple(self.classes)
        if len(classes) < 2:
            raise ModelFormatError(f"a model needs at least 2 classes, got {len(classes)}")
        ids = [c.id for c in classes]
        if len(set(ids)) != len(ids):
            raise ModelFormatError(f"duplicate class ids in {ids}")
        n_pairs = len(classes) * (len(classes) - 1) // 2
        weights = np.array(self.weights, dtype=np.float64, ndmin=2)
        vectors = {name: np.array(getattr(self, name), dtype=np.float64).reshape(-1)
                   for name in ("biases", "sigmoid_a", "sigmoid_b")}
        if weights.shape[0] != n_pairs:
            raise ModelFormatError(f"expected {n_pairs} hyperplanes for {len(classes)} classes, "
                                   f"got {weights.shape[0]}")
        for name, vec in vectors.items():
            if vec.size != n_pairs:
                raise ModelFormatError(f"{name} has {vec.size} entries, expected {n_pairs}")
        for name, arr in [("weights", weights), *vectors.items()]:
            if not np.all(np.isfinite(arr)):
                raise ModelFormatError(f"non-finite values in {name}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "classes", classes)

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def n_pairs(self):
        return self.weights.shape[0]

    @property
    def bands(self):
        return self.weights.shape[1]

    @property
    def pairs(self):
        return list(combinations(range(self.n_classes), 2))

    @property
    def class_ids(self):
        return np.array([c.id for c in self.classes], dtype=np.int64)

    @property
    def colors(self):
        return np.array([c.color for c in self.classes], dtype=np.uint8)


def _tokens(lines, pos, expected_head, source):
    if pos >= len(lines):
        raise ModelFormatError(f"{source}: unexpected end of file, expected {expected_head!r} line")
    lineno, text = lines[pos]
    parts = text.split()
    if not parts or parts[0] != expected_head:
        raise ModelFormatError(f"{source}:{lineno}: expected {expected_head!r} line, got {text!r}")
    return parts


def parse_model(text, source="<model>"):
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), 1)
             if ln.strip() and not ln.lstrip().startswith("#")]

    def where(pos):
        return f"{source}:{lines[pos][0] if pos < len(lines) else 'EOF'}"

    head = _tokens(lines, 0, "classes", source)
    try:
        if len(head) != 4 or head[2] != "bands":
            raise ValueError
        n_classes, bands = int(head[1]), int(head[3])
    except ValueError:
        raise ModelFormatError(f"{where(0)}: expected 'classes C bands B', got {lines[0][1]!r}") from None
    if bands < 1:
        raise ModelFormatError(f"{where(0)}: band count must be >= 1")
    classes = []
    pos = 1
    for _ in range(n_classes):
        parts = _tokens(lines, pos, "class", source)
        if len(parts) != 6:
            raise ModelFormatError(f"{where(pos)}: expected 'class id name r g b'")
        try:
            color = tuple(int(v) for v in parts[3:6])
            classes.append(ClassLabel(int(parts[1]), parts[2], color))
        except ValueError:
            raise ModelFormatError(f"{where(pos)}: malformed class line {lines[pos][1]!r}") from None
        if not all(0 <= v <= 255 for v in color):
            raise ModelFormatError(f"{where(pos)}: colour components must be in 0..255")
        pos += 1
    index = {c.id: i for i, c in enumerate(classes)}
    weights, biases, sig_a, sig_b = [], [], [], []
    for a, b in combinations(range(n_classes), 2):
        parts = _tokens(lines, pos, "pair", source)
        if len(parts) != 6:
            raise ModelFormatError(f"{where(pos)}: expected 'pair a b A B bias'")
        try:
            got = (index[int(parts[1])], index[int(parts[2])])
        except (KeyError, ValueError):
            raise ModelFormatError(f"{where(pos)}: unknown class ids in {lines[pos][1]!r}") from None
        if got != (a, b):
            raise ModelFormatError(f"{where(pos)}: expected pair ({classes[a].id}, {classes[b].id}) "
                                   f"in lexicographic order, got {parts[1]} {parts[2]}")
        try:
            sig_a.append(float(parts[3]))
            sig_b.append(float(parts[4]))
            biases.append(float(parts[5]))
            w = [float(v) for v in lines[pos + 1][1].split()] if pos + 1 < len(lines) else []
        except ValueError:
            raise ModelFormatError(f"{where(pos)}: non-numeric pair parameters") from None
        if len(w) != bands:
            raise ModelFormatError(f"{where(pos + 1)}: expected {bands} weights, got {len(w)}")
        weights.append(w)
        pos += 2
    if pos != len(lines):
        raise ModelFormatError(f"{where(pos)}: trailing content after last pair")
    return SvmModel(tuple(classes), np.array(weights).reshape(len(weights), bands),
                    np.array(biases), np.array(sig_a), np.array(sig_b))


def load_model(path):
    path = Path(path)
    return parse_model(path.read_text(encoding="utf-8"), str(path))


def format_model(model):
    out = [f"classes {model.n_classes} bands {model.bands}"]
    for c in model.classes:
        out.append(f"class {c.id} {c.name} {c.color[0]} {c.color[1]} {c.color[2]}")
    for k, (a, b) in enumerate(model.pairs):
        out.append(f"pair {model.classes[a].id} {model.classes[b].id} "
                   f"{float(model.sigmoid_a[k])!r} {float(model.sigmoid_b[k])!r} {float(model.biases[k])!r}")
        out.append(" ".join(repr(float(v)) for v in model.weights[k]))
    return "\n".join(out) + "\n"


def save_model(model, path):
    Path(path).write_text(format_model(model), encoding="utf-8")


def _as_pixels(x):
    pixel_matrix = getattr(x, "pixel_matrix", None)
    if pixel_matrix is not None:
        return pixel_matrix()
    x = np.asarray(x)
    if x.ndim == 3:
        return x.reshape(-1, x.shape[-1])
    if x.ndim != 2:
        raise DimensionError(f"expected pixels x bands samples, got shape {x.shape}")
    return x


def decision_values(cube, model):
    """Signed hyperplane scores ``w_k . x_p + b_k``, shape ``(pixels, n_pairs)``.

    Bands are accumulated left to right in binary64 so every pixel gets the
    same rounding sequence regardless of how pixels are partitioned.
    """
    x = _as_pixels(cube)
    if x.shape[1] != model.bands:
        raise DimensionError(f"cube has {x.shape[1]} bands, model expects {model.bands}")
    d = np.empty((x.shape[0], model.n_pairs), dtype=np.float64)
    d[:] = model.biases
    w = model.weights
    for b in range(model.bands):
        d += x[:, b, None].astype(np.float64) * w[:, b]
    return d


def binary_probabilities(d, model):
    """Sigmoid probability ``r_ab`` that each pixel belongs to ``a`` rather than ``b``."""
    z = np.clip(np.asarray(d, dtype=np.float64) * model.sigmoid_a + model.sigmoid_b,
                -EXP_CLIP, EXP_CLIP)
    r = 1.0 / (1.0 + np.exp(z))
    return np.clip(r, PROB_EPS, 1.0 - PROB_EPS)


def _pairwise_matrix(r, n_classes):
    """Expand ``(n, n_pairs)`` binary probabilities to ``R[n, t, j] = r_tj``."""
    r = np.asarray(r, dtype=np.float64)
    R = np.zeros((r.shape[0], n_classes, n_classes))
    for k, (a, b) in enumerate(combinations(range(n_classes), 2)):
        R[:, a, b] = r[:, k]
        R[:, b, a] = 1.0 - r[:, k]
    return R


def coupling_matrix(r, n_classes):
    """Quadratic form ``Q`` whose simplex minimiser is the coupled estimate."""
    R = _pairwise_matrix(np.atleast_2d(r), n_classes)
    Rt = np.swapaxes(R, 1, 2)
    Q = -Rt * R
    idx = np.arange(n_classes)
    Q[:, idx, idx] = np.sum(Rt ** 2, axis=2) - Rt[:, idx, idx] ** 2
    return Q


def couple_probabilities_batch(r, n_classes):
    """Couple pairwise probabilities for many pixels at once.

    Returns ``(p, converged)`` with ``p`` of shape ``(n, n_classes)``.
    """
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    n = r.shape[0]
    C = int(n_classes)
    if C < 2:
        raise ParameterError(f"coupling needs at least 2 classes, got {C}")
    if r.shape[1] != C * (C - 1) // 2:
        raise DimensionError(f"expected {C * (C - 1) // 2} pairwise values, got {r.shape[1]}")
    if C == 2:
        return np.column_stack([r[:, 0], 1.0 - r[:, 0]]), np.ones(n, dtype=bool)

    Q = coupling_matrix(r, C)
    p = np.full((n, C), 1.0 / C)
    tol = 0.005 / C
    converged = np.zeros(n, dtype=bool)
    active = np.arange(n)
    for _ in range(100 * C):
        if active.size == 0:
            break
        q = Q[active]
        pa = p[active]
        before = pa.copy()
        for t in range(C):
            qp = [sum(q[:, i, j] * pa[:, j] for j in range(C)) for i in range(C)]
            pqp = sum(pa[:, i] * qp[i] for i in range(C))
            off = qp[t] - q[:, t, t] * pa[:, t]
            pa[:, t] = (pqp - off) / q[:, t, t]
            pa /= pa.sum(axis=1, keepdims=True)
        p[active] = pa
        done = np.max(np.abs(pa - before), axis=1) < tol
        converged[active[done]] = True
        active = active[~done]
    return p, converged


def couple_probabilities(r, n_classes):
    """Couple one pixel's pairwise probabilities into a class distribution.

    ``r`` is either the ``n_pairs`` values in lexicographic pair order or a
    ``C x C`` matrix with ``r[t, j]`` the probability of ``t`` against ``j``.
    Returns ``(p, converged)``.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.ndim == 2:
        r = np.array([r[a, b] for a, b in combinations(range(n_classes), 2)])
    p, ok = couple_probabilities_batch(r.reshape(1, -1), n_classes)
    return p[0], bool(ok[0])


def svm_probability_maps(cube, model, n_workers=1, executor=None, return_converged=False):
    """Raw probability map ``P`` of shape ``(pixels, n_classes)``.

    Pixels are processed in fixed blocks so the output does not depend on
    the worker count.
    """
    x = _as_pixels(cube)
    if x.shape[1] != model.bands:
        raise DimensionError(f"cube has {x.shape[1]} bands, model expects {model.bands}")
    spans = [(s, min(s + PIXEL_BLOCK, x.shape[0])) for s in range(0, x.shape[0], PIXEL_BLOCK)]

    def block(span):
        d = decision_values(x[span[0]:span[1]], model)
        return couple_probabilities_batch(binary_probabilities(d, model), model.n_classes)

    parts = parallel_map(block, spans, n_workers, executor)
    P = np.concatenate([p for p, _ in parts])
    if return_converged:
        return P, np.concatenate([c for _, c in parts])
    return P


def classify_argmax(maps):
    """Column index of the largest probability per row; ties go to the lowest index."""
    maps = np.asarray(maps)
    return np.argmax(maps, axis=-1)
