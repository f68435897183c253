"""Repetition statistics, power traces and time/power figures of merit.

The three figures of merit are ``s / (T * P)``, ``s / (T**2 * P)`` and
``s / (T * P**2)`` with ``T`` in seconds, ``P`` in watts and the report
scale ``s = 1000``.
"""

import csv
import io
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import ParameterError

logger = logging.getLogger(__name__)

FOM_SCALE = 1000.0
STDDEV_LIMIT = 0.01
REPORT_COLUMNS = ("image", "time_s", "power_w", "fom1", "fom2", "fom3", "reps", "stddev_pct")
MISSING = "-"


@dataclass(frozen=True, eq=False)
class PowerTrace:
    """Power samples; ``times`` in seconds, strictly increasing."""

    times: np.ndarray
    watts: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64).reshape(-1)
        w = np.asarray(self.watts, dtype=np.float64).reshape(-1)
        if t.size != w.size:
            raise ParameterError(f"{t.size} timestamps but {w.size} power samples")
        if t.size and np.any(np.diff(t) <= 0):
            raise ParameterError("trace timestamps must be strictly increasing")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(t)):
            raise ParameterError("power samples must be finite and >= 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "watts", w)

    def __len__(self):
        return self.times.size


def load_power_trace(path):
    """Read a ``t_ms,watts`` CSV trace (timestamps in milliseconds)."""
    path = Path(path)
    times, watts = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["t_ms", "watts"]:
            raise ParameterError(f"{path}:1: expected header 't_ms,watts', got {header}")
        for lineno, row in enumerate(reader, 2):
            if not row or not "".join(row).strip():
                continue
            try:
                t_ms, w = (float(v) for v in row)
            except ValueError:
                raise ParameterError(f"{path}:{lineno}: malformed sample {row}") from None
            times.append(t_ms / 1000.0)
            watts.append(w)
    return PowerTrace(np.array(times), np.array(watts))


@dataclass(frozen=True)
class PowerAverage:
    watts: float
    clipped: bool


def average_power(trace, t0=None, t1=None):
    """Time-weighted mean power over ``[t0, t1]`` by trapezoidal integration.

    Bounds default to the trace span. If the interval extends past the
    trace, the average is taken over the overlap and ``clipped`` is set.
    """
    if len(trace) == 0:
        raise ParameterError("power trace is empty")
    start, end = trace.times[0], trace.times[-1]
    t0 = start if t0 is None else float(t0)
    t1 = end if t1 is None else float(t1)
    if not t1 > t0:
        raise ParameterError(f"interval [{t0}, {t1}] has no positive length")
    lo, hi = max(t0, start), min(t1, end)
    clipped = t0 < start or t1 > end
    if not hi > lo:
        raise ParameterError(f"interval [{t0}, {t1}] does not overlap the trace span [{start}, {end}]")
    if clipped:
        logger.warning("power interval [%g, %g] clipped to trace span [%g, %g]", t0, t1, lo, hi)
    inner = (trace.times > lo) & (trace.times < hi)
    t = np.concatenate([[lo], trace.times[inner], [hi]])
    w = np.interp(t, trace.times, trace.watts)
    return PowerAverage(float(np.trapezoid(w, t) / (hi - lo)), clipped)


@dataclass(frozen=True)
class Foms:
    fom1: float
    fom2: float
    fom3: float

    def __iter__(self):
        return iter((self.fom1, self.fom2, self.fom3))


def compute_foms(time_s, power_w, scale=FOM_SCALE):
    if not time_s > 0:
        raise ParameterError(f"time must be > 0, got {time_s}")
    if not power_w > 0:
        raise ParameterError(f"power must be > 0, got {power_w}")
    base = scale / (time_s * power_w)
    return Foms(base, base / time_s, base / power_w)


@dataclass(frozen=True)
class RepetitionStats:
    mean: float
    stddev_fraction: float
    count: int

    @property
    def under_limit(self):
        return self.stddev_fraction < STDDEV_LIMIT


def repetition_stats(durations):
    """Mean and population standard deviation relative to the mean."""
    d = np.asarray(list(durations), dtype=np.float64)
    if d.size == 0:
        raise ParameterError("need at least one duration")
    mean = float(np.mean(d))
    if d.size == 1:
        return RepetitionStats(mean, 0.0, 1)
    std = float(np.std(d))
    return RepetitionStats(mean, std / mean if mean > 0 else 0.0, int(d.size))


@dataclass
class FomReport:
    image_id: str
    time_s: float
    power_w: float = None
    foms: Foms = None
    reps: int = None
    stddev_fraction: float = None

    @property
    def under_limit(self):
        return None if self.stddev_fraction is None else self.stddev_fraction < STDDEV_LIMIT


def build_report(image_id, durations, power_w=None):
    stats = repetition_stats(durations)
    foms = compute_foms(stats.mean, power_w) if power_w is not None else None
    return FomReport(image_id, stats.mean, power_w, foms, stats.count, stats.stddev_fraction)


def format_fom(value):
    if value is None:
        return MISSING
    if value >= 1:
        return f"{value:.2f}"
    return f"{value:.3g}"


def _cells(report):
    def num(v, fmt):
        return MISSING if v is None else format(v, fmt)

    foms = report.foms
    return [
        report.image_id or MISSING,
        format_fom(report.time_s),
        format_fom(report.power_w),
        format_fom(foms.fom1 if foms else None),
        format_fom(foms.fom2 if foms else None),
        format_fom(foms.fom3 if foms else None),
        MISSING if report.reps is None else str(report.reps),
        num(None if report.stddev_fraction is None else 100.0 * report.stddev_fraction, ".2f"),
    ]


def render_report(reports, fmt="text"):
    """Render one or more reports as a text table or comma-separated values."""
    if isinstance(reports, FomReport):
        reports = [reports]
    rows = [list(REPORT_COLUMNS)] + [_cells(r) for r in reports]
    if fmt == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        return buf.getvalue()
    if fmt != "text":
        raise ParameterError(f"unknown report format {fmt!r}")
    widths = [max(len(row[i]) for row in rows) for i in range(len(REPORT_COLUMNS))]
    lines = ["  ".join(cell.rjust(w) if i else cell.ljust(w) for i, (cell, w) in enumerate(zip(row, widths)))
             for row in rows]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def emit_report(reports, path, fmt="text"):
    Path(path).write_text(render_report(reports, fmt), encoding="utf-8")


@dataclass(frozen=True)
class PublishedRow:
    table: str
    image: str
    device: str
    time_s: float
    power_w: float
    foms: Foms
    lineno: int = 0


def parse_fom_table(text, source="<table>"):
    """Parse ``table,image,device,time_s,power_w,fom1,fom2,fom3`` rows.

    Malformed rows raise :class:`ParameterError` naming the line.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    expected = ["table", "image", "device", "time_s", "power_w", "fom1", "fom2", "fom3"]
    if header is None or [h.strip() for h in header] != expected:
        raise ParameterError(f"{source}:1: expected header {','.join(expected)}")
    rows = []
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        if len(row) != len(expected):
            raise ParameterError(f"{source}:{lineno}: expected {len(expected)} fields, got {len(row)}")
        try:
            nums = [float(v.replace(",", "")) for v in row[3:]]
        except ValueError:
            raise ParameterError(f"{source}:{lineno}: non-numeric value in {row}") from None
        rows.append(PublishedRow(row[0], row[1], row[2], nums[0], nums[1], Foms(*nums[2:]), lineno))
    return rows


def load_fom_table(path=None):
    """Load a FoM table; with no path, the bundled published table."""
    if path is None:
        text = resources.files("hsiss.data").joinpath("published_foms.csv").read_text(encoding="utf-8")
        return parse_fom_table(text, "published_foms.csv")
    path = Path(path)
    return parse_fom_table(path.read_text(encoding="utf-8"), str(path))


@dataclass(frozen=True)
class FomComparison:
    row: PublishedRow
    computed: Foms
    rel_errors: tuple

    def within(self, tol):
        return all(e <= tol for e in self.rel_errors)


def _rel_error(computed, published):
    if published == 0:
        return 0.0 if computed == 0 else float("inf")
    return abs(computed - published) / abs(published)


def compare_published(rows):
    out = []
    for row in rows:
        computed = compute_foms(row.time_s, row.power_w)
        errs = tuple(_rel_error(c, p) for c, p in zip(computed, row.foms))
        out.append(FomComparison(row, computed, errs))
    return out
