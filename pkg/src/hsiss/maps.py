"""Binary PGM (P5) label maps and PPM (P6) colour maps."""

from pathlib import Path

import numpy as np

from .exceptions import CubeFormatError, DimensionError


def write_label_map(labels, path):
    """Write class ids, one byte per pixel."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise DimensionError(f"expected a (rows, cols) label map, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() > 255):
        raise ValueError("label ids must fit in one byte (0..255)")
    rows, cols = labels.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (cols, rows) + labels.astype(np.uint8).tobytes())


def write_color_map(rgb, path):
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionError(f"expected a (rows, cols, 3) image, got shape {rgb.shape}")
    rows, cols, _ = rgb.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (cols, rows) + rgb.tobytes())


def colorize(labels, class_ids, colors):
    """Map class ids to RGB using the model's class colours."""
    labels = np.asarray(labels)
    lut = np.zeros((256, 3), dtype=np.uint8)
    lut[np.asarray(class_ids)] = np.asarray(colors, dtype=np.uint8)
    return lut[labels.astype(np.uint8)]


def _pnm_tokens(data, count, path):
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CubeFormatError(f"{path}: truncated PNM header")
        tokens.append(int(data[start:pos]))
    return tokens, pos + 1


def read_pnm(path):
    """Read a P5 or P6 file written by this module; returns the pixel array."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise CubeFormatError(f"{path}: not a binary PGM/PPM file")
    (cols, rows, maxval), offset = _pnm_tokens(data, 3, path)
    if maxval != 255:
        raise CubeFormatError(f"{path}: only 8-bit maps are supported")
    channels = 1 if magic == b"P5" else 3
    body = np.frombuffer(data, dtype=np.uint8, offset=offset)
    if body.size != rows * cols * channels:
        raise CubeFormatError(f"{path}: expected {rows * cols * channels} pixel bytes, found {body.size}")
    shape = (rows, cols) if channels == 1 else (rows, cols, 3)
    return body.reshape(shape).copy()
