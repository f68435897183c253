"""Hyperspectral cube model and its raw on-disk format.

A cube is stored as two files: a plain-text header of ``key=value`` lines
and a raw data file of IEEE-754 binary32 little-endian samples. The data
file is band-sequential (BSQ, ``layout=bsq``) or band-interleaved by pixel
(BIP, ``layout=bip``). Pixels are addressed row-major, ``p = r * cols + c``.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .exceptions import CubeFormatError, CubeValidationError, DimensionError

SAMPLE_FORMAT = "float32le"
SAMPLE_DTYPE = np.dtype("<f4")


class Layout(str, Enum):
    BAND_MAJOR = "bsq"
    PIXEL_MAJOR = "bip"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"bsq": cls.BAND_MAJOR, "band_major": cls.BAND_MAJOR, "bandmajor": cls.BAND_MAJOR,
                   "bip": cls.PIXEL_MAJOR, "pixel_major": cls.PIXEL_MAJOR, "pixelmajor": cls.PIXEL_MAJOR}
        try:
            return aliases[key]
        except KeyError:
            raise CubeFormatError(f"unknown layout tag {value!r}") from None


@dataclass(frozen=True)
class CubeHeader:
    rows: int
    cols: int
    bands: int
    layout: Layout = Layout.BAND_MAJOR
    sample_format: str = SAMPLE_FORMAT
    image_id: str = ""
    data_file: str = ""

    @property
    def n_samples(self):
        return self.rows * self.cols * self.bands

    @property
    def n_bytes(self):
        return self.n_samples * SAMPLE_DTYPE.itemsize

    def to_text(self):
        lines = [f"rows={self.rows}", f"cols={self.cols}", f"bands={self.bands}",
                 f"layout={self.layout.value}", f"format={self.sample_format}"]
        if self.image_id:
            lines.append(f"image_id={self.image_id}")
        if self.data_file:
            lines.append(f"data_file={self.data_file}")
        return "\n".join(lines) + "\n"


def parse_key_values(text, source="<text>"):
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CubeFormatError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().lower()] = value.strip()
    return out


def _positive_int(fields, key, source):
    if key not in fields:
        raise CubeFormatError(f"{source}: missing required key {key!r}")
    try:
        value = int(fields[key])
    except ValueError:
        raise CubeFormatError(f"{source}: {key}={fields[key]!r} is not an integer") from None
    if value < 1:
        raise CubeFormatError(f"{source}: {key} must be >= 1, got {value}")
    return value


def read_header(header_path):
    header_path = Path(header_path)
    fields = parse_key_values(header_path.read_text(encoding="utf-8"), str(header_path))
    fmt = fields.get("format", SAMPLE_FORMAT).lower()
    if fmt != SAMPLE_FORMAT:
        raise CubeFormatError(f"{header_path}: unsupported sample format {fmt!r}, expected {SAMPLE_FORMAT}")
    return CubeHeader(
        rows=_positive_int(fields, "rows", header_path),
        cols=_positive_int(fields, "cols", header_path),
        bands=_positive_int(fields, "bands", header_path),
        layout=Layout.parse(fields.get("layout", "bsq")),
        sample_format=fmt,
        image_id=fields.get("image_id", ""),
        data_file=fields.get("data_file", ""),
    )


def _first_nonfinite(data):
    bad = np.flatnonzero(~np.isfinite(data))
    return int(bad[0]) if bad.size else None


@dataclass(frozen=True, eq=False)
class HsCube:
    """Immutable rows x cols x bands block of binary32 samples.

    ``data`` is the flat sample sequence in the order given by ``layout``.
    """

    rows: int
    cols: int
    bands: int
    data: np.ndarray = field(repr=False)
    layout: Layout = Layout.BAND_MAJOR
    image_id: str = ""

    def __post_init__(self):
        for name in ("rows", "cols", "bands"):
            if int(getattr(self, name)) < 1:
                raise CubeValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        data = np.ascontiguousarray(self.data, dtype=np.float32).reshape(-1)
        expected = self.rows * self.cols * self.bands
        if data.size != expected:
            raise CubeValidationError(
                f"data length {data.size} != rows*cols*bands = {expected}")
        bad = _first_nonfinite(data)
        if bad is not None:
            raise CubeValidationError(f"non-finite sample at flat index {bad}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "layout", Layout.parse(self.layout))

    @classmethod
    def from_array(cls, array, image_id="", layout=Layout.BAND_MAJOR):
        """Build a cube from a ``(rows, cols, bands)`` array."""
        array = np.asarray(array, dtype=np.float32)
        if array.ndim != 3:
            raise DimensionError(f"expected a (rows, cols, bands) array, got shape {array.shape}")
        rows, cols, bands = array.shape
        flat = array.reshape(rows * cols, bands)
        layout = Layout.parse(layout)
        data = flat.T.reshape(-1) if layout is Layout.BAND_MAJOR else flat.reshape(-1)
        return cls(rows, cols, bands, data, layout, image_id)

    @property
    def n_pixels(self):
        return self.rows * self.cols

    @property
    def shape(self):
        return (self.rows, self.cols, self.bands)

    def pixel_matrix(self):
        """Return the samples as an ``(n_pixels, bands)`` array (view when possible)."""
        if self.layout is Layout.PIXEL_MAJOR:
            return self.data.reshape(self.n_pixels, self.bands)
        return self.data.reshape(self.bands, self.n_pixels).T

    def band_matrix(self):
        """Return the samples as a ``(bands, n_pixels)`` array (view when possible)."""
        return self.pixel_matrix().T

    def to_array(self):
        return np.ascontiguousarray(self.pixel_matrix()).reshape(self.rows, self.cols, self.bands)

    def sample(self, pixel, band):
        if self.layout is Layout.PIXEL_MAJOR:
            return self.data[pixel * self.bands + band]
        return self.data[band * self.n_pixels + pixel]

    def header(self, data_file=""):
        return CubeHeader(self.rows, self.cols, self.bands, self.layout,
                          image_id=self.image_id, data_file=data_file)


def convert_layout(cube, target):
    """Return ``cube`` re-ordered into ``target`` layout; same logical samples."""
    target = Layout.parse(target)
    if target is cube.layout:
        return cube
    if target is Layout.PIXEL_MAJOR:
        data = cube.data.reshape(cube.bands, cube.n_pixels).T.reshape(-1)
    else:
        data = cube.data.reshape(cube.n_pixels, cube.bands).T.reshape(-1)
    return HsCube(cube.rows, cube.cols, cube.bands, data, target, cube.image_id)


def default_data_path(header_path):
    return Path(header_path).with_suffix(".raw")


def _resolve_data_path(header_path, header, data_path):
    if data_path is not None:
        return Path(data_path)
    if header.data_file:
        return Path(header_path).parent / header.data_file
    return default_data_path(header_path)


def load_cube(header_path, data_path=None):
    """Load a cube from its header and raw data file.

    When ``data_path`` is omitted the header's ``data_file`` key is used,
    falling back to the header path with a ``.raw`` suffix.
    """
    header = read_header(header_path)
    data_path = _resolve_data_path(header_path, header, data_path)
    actual = data_path.stat().st_size
    if actual != header.n_bytes:
        raise CubeFormatError(
            f"{data_path}: expected {header.n_bytes} bytes for "
            f"{header.rows}x{header.cols}x{header.bands} binary32 samples, found {actual}")
    data = np.fromfile(data_path, dtype=SAMPLE_DTYPE)
    bad = _first_nonfinite(data)
    if bad is not None:
        raise CubeValidationError(f"{data_path}: non-finite sample at flat index {bad}")
    return HsCube(header.rows, header.cols, header.bands, data.astype(np.float32, copy=False),
                  header.layout, header.image_id)


def save_cube(cube, header_path, data_path=None):
    header_path = Path(header_path)
    data_path = Path(data_path) if data_path is not None else default_data_path(header_path)
    ref = data_path.name if data_path.parent.resolve() == header_path.parent.resolve() else str(data_path)
    cube.data.astype(SAMPLE_DTYPE, copy=False).tofile(data_path)
    header_path.write_text(cube.header(data_file=ref).to_text(), encoding="utf-8")


# Plain binary32 matrices (probability maps, neighbor debug output) share the
# same sidecar convention with ``kind=matrix`` headers.

def save_matrix(matrix, header_path, data_path=None, role=""):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {matrix.shape}")
    header_path = Path(header_path)
    data_path = Path(data_path) if data_path is not None else default_data_path(header_path)
    np.ascontiguousarray(matrix, dtype=SAMPLE_DTYPE).tofile(data_path)
    lines = ["kind=matrix", f"rows={matrix.shape[0]}", f"cols={matrix.shape[1]}",
             f"format={SAMPLE_FORMAT}"]
    if role:
        lines.append(f"role={role}")
    lines.append(f"data_file={data_path.name}")
    header_path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_matrix(header_path, data_path=None):
    header_path = Path(header_path)
    fields = parse_key_values(header_path.read_text(encoding="utf-8"), str(header_path))
    rows = _positive_int(fields, "rows", header_path)
    cols = _positive_int(fields, "cols", header_path)
    if data_path is None:
        data_path = header_path.parent / fields["data_file"] if "data_file" in fields \
            else default_data_path(header_path)
    data_path = Path(data_path)
    expected = rows * cols * SAMPLE_DTYPE.itemsize
    actual = data_path.stat().st_size
    if actual != expected:
        raise CubeFormatError(f"{data_path}: expected {expected} bytes, found {actual}")
    return np.fromfile(data_path, dtype=SAMPLE_DTYPE).astype(np.float32).reshape(rows, cols)
