"""Time-series container, CSV ingestion, lag alignment and differencing.

Also provides seeded synthetic generators (AR(1), random walk, MA(1)) used
as test fixtures throughout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class SeriesError(ValueError):
    pass


class IngestionError(SeriesError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    """Finite real observations with an optional strictly increasing time axis."""

    values: np.ndarray
    name: str = ""
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise SeriesError("series must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(vals)):
            raise SeriesError("series contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype=float)
            if ts.shape != vals.shape:
                raise SeriesError("timestamps length mismatch")
            if np.any(np.diff(ts) <= 0):
                raise SeriesError("timestamps must be strictly increasing")
            ts.setflags(write=False)
            object.__setattr__(self, "timestamps", ts)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class DelayMatrix:
    """Lagged regressors X (lag_1 first) aligned with targets y_t."""

    regressors: np.ndarray  # shape (N - p, p)
    targets: np.ndarray  # shape (N - p,)
    p: int

    def __post_init__(self):
        X = np.asarray(self.regressors, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.p or X.shape[0] != y.size:
            raise SeriesError("delay matrix shape inconsistent")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "regressors", X)
        object.__setattr__(self, "targets", y)


@dataclass(frozen=True)
class DiffTable:
    """Differenced levels Del_d for d = 1..d_max (level 0 is the source)."""

    levels: dict[int, np.ndarray] = field(repr=False)
    d_max: int = 0


def load_csv(path, column) -> TimeSeries:
    """Parse one numeric column of a headered CSV into a TimeSeries.

    ``column`` is a header name or zero-based index.  Empty cells at the head
    of the column are dropped; an empty or malformed cell later is an
    ingestion error reported with its row number.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file")
        if isinstance(column, int):
            idx = column
            if not 0 <= idx < len(header):
                raise IngestionError(f"column index {idx} out of range")
            name = header[idx]
        else:
            try:
                idx = header.index(column)
            except ValueError:
                raise IngestionError(f"column {column!r} not in header {header}")
            name = column
        values = []
        head = True
        for rownum, row in enumerate(reader, start=2):
            if idx >= len(row):
                raise IngestionError(f"{path}: row {rownum} too short")
            cell = row[idx].strip()
            if cell == "" or cell.upper() in {"NA", "NAN", "NULL"}:
                if head:
                    continue
                raise IngestionError(f"{path}: missing value at row {rownum}")
            try:
                values.append(float(cell))
            except ValueError:
                raise IngestionError(
                    f"{path}: unparseable cell {cell!r} at row {rownum}"
                )
            head = False
    if not values:
        raise IngestionError(f"{path}: no numeric data in column {name!r}")
    return TimeSeries(np.array(values), name=name)


def build_delay_matrix(y, p: int) -> DelayMatrix:
    """Align [y_{t-1}, ..., y_{t-p}] regressors with targets y_t."""
    vals = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
    n = vals.size
    if p < 1:
        raise SeriesError("p must be positive")
    if n <= p:
        raise SeriesError(f"need more than p={p} observations, have {n}")
    X = np.column_stack([vals[p - k : n - k] for k in range(1, p + 1)])
    return DelayMatrix(regressors=X, targets=vals[p:], p=p)


def generate_differences(y, d_max: int) -> DiffTable:
    """Repeated first differences Del_1..Del_{d_max}."""
    vals = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
    if d_max < 1:
        raise SeriesError("d_max must be positive")
    if vals.size <= d_max:
        raise SeriesError(f"need more than d_max={d_max} observations")
    levels: dict[int, np.ndarray] = {0: vals}
    prev = vals
    for d in range(1, d_max + 1):
        prev = np.diff(prev)
        levels[d] = prev
    return DiffTable(levels=levels, d_max=d_max)


def difference_anchors(y, d: int) -> np.ndarray:
    """Anchor values for inverting d rounds of differencing.

    anchors[j] is the last value of the j-times differenced history,
    j = 0..d-1; these are the integration constants consumed by
    ``invert_difference`` when extending the series forward.
    """
    vals = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
    anchors = np.empty(d)
    cur = vals
    for j in range(d):
        if cur.size < 1:
            raise SeriesError("series too short for requested anchors")
        anchors[j] = cur[-1]
        cur = np.diff(cur)
    return anchors


def invert_difference(forecast_diff, history_tail, d: int):
    """Integrate a d-times differenced forecast back to the original scale.

    ``history_tail`` holds the anchors from ``difference_anchors`` (level 0
    first).  d=0 is the identity.  Round trip with the differencing of a
    series extension is exact.
    """
    out = np.asarray(forecast_diff, dtype=float).copy()
    if d == 0:
        return out
    anchors = np.asarray(history_tail, dtype=float)
    if anchors.size < d:
        raise SeriesError(f"need {d} anchors, got {anchors.size}")
    for j in range(d - 1, -1, -1):
        out = anchors[j] + np.cumsum(out)
    return out


def synth_ar1(phi: float, n: int, sigma: float, seed: int) -> TimeSeries:
    """Stationary AR(1) draw y_t = phi y_{t-1} + e_t, e ~ N(0, sigma^2)."""
    if abs(phi) >= 1:
        raise SeriesError("AR(1) requires |phi| < 1")
    if n < 10:
        raise SeriesError("n must be at least 10")
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, sigma, size=n + 100)
    y = np.empty(n + 100)
    y[0] = eps[0]
    for t in range(1, n + 100):
        y[t] = phi * y[t - 1] + eps[t]
    return TimeSeries(y[100:], name=f"ar1(phi={phi})")


def synth_random_walk(n: int, sigma: float, seed: int) -> TimeSeries:
    if n < 10:
        raise SeriesError("n must be at least 10")
    rng = np.random.default_rng(seed)
    return TimeSeries(
        np.cumsum(rng.normal(0.0, sigma, size=n)), name="random_walk"
    )


def synth_ma1(theta: float, n: int, sigma: float, seed: int) -> TimeSeries:
    """MA(1) draw y_t = e_t + theta e_{t-1}."""
    if n < 10:
        raise SeriesError("n must be at least 10")
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, sigma, size=n + 1)
    return TimeSeries(eps[1:] + theta * eps[:-1], name=f"ma1(theta={theta})")
