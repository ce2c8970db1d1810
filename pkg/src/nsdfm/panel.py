"""Observed panels, variable transforms, differencing and detrending.

A panel stores ``n`` series observed over periods ``0..T`` as an
``n x (T + 1)`` array (row = series, column = time).
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

FREQUENCIES = ("quarterly", "monthly", "daily")
_FREQ_ALIASES = {"q": "quarterly", "m": "monthly", "d": "daily"}


@dataclass(frozen=True)
class Panel:
    """Rectangular multivariate time series.

    Parameters
    ----------
    values : ndarray, shape (n, T + 1)
    series_names : list of str
    transform_codes : list of int
        ``1`` none, ``2`` log, ``3`` log difference.
    frequency : str
    dates : list of str, optional
        Labels for the columns; carried through for output only.
    """

    values: np.ndarray
    series_names: list = field(default_factory=list)
    transform_codes: list = field(default_factory=list)
    frequency: str = "quarterly"
    dates: list | None = None

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "values", values)
        n = values.shape[0]
        if not self.series_names:
            object.__setattr__(self, "series_names", [f"x{i + 1}" for i in range(n)])
        if not self.transform_codes:
            object.__setattr__(self, "transform_codes", [1] * n)
        if len(self.series_names) != n or len(self.transform_codes) != n:
            raise DataError(
                f"panel has {n} series but {len(self.series_names)} names "
                f"and {len(self.transform_codes)} transform codes"
            )
        if self.dates is not None and len(self.dates) != values.shape[1]:
            raise DataError("date labels do not match the number of observations")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        """Index of the last period (the panel has ``T + 1`` columns)."""
        return self.values.shape[1] - 1

    def index_of(self, name: str) -> int:
        try:
            return self.series_names.index(name)
        except ValueError:
            raise DataError(f"unknown series {name!r}") from None

    def with_values(self, values, dates=None) -> "Panel":
        return replace(self, values=values, dates=dates)


@dataclass(frozen=True)
class TrendFit:
    """Estimated linear-trend slopes; intercepts stay in the detrended data."""

    slope: np.ndarray
    method: str = "ls"
    intercept_kept: bool = True


def as_matrix(data) -> np.ndarray:
    if isinstance(data, Panel):
        return data.values
    return np.atleast_2d(np.asarray(data, dtype=np.float64))


def _wrap(like, values, dates=None):
    if isinstance(like, Panel):
        return like.with_values(values, dates)
    return values


def difference(p):
    """First differences; column ``t - 1`` of the output is ``x_t - x_{t-1}``."""
    x = as_matrix(p)
    if x.shape[1] < 2:
        raise DataError("need at least two observations to difference")
    dates = p.dates[1:] if isinstance(p, Panel) and p.dates is not None else None
    return _wrap(p, np.diff(x, axis=1), dates)


def integrate(d, x0=None):
    """Cumulate differences from the initial condition ``x0`` (default zero).

    Output column 0 is ``x0`` and column ``t`` is ``x0 + d_1 + ... + d_t``.
    """
    dx = as_matrix(d)
    n = dx.shape[0]
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).ravel()
    if x0.shape[0] != n:
        raise ValueError(f"x0 has length {x0.shape[0]}, expected {n}")
    out = np.empty((n, dx.shape[1] + 1))
    out[:, 0] = x0
    np.cumsum(dx, axis=1, out=out[:, 1:])
    out[:, 1:] += x0[:, None]
    if isinstance(d, Panel):
        return replace(d, values=out, dates=None)
    return out


def detrend_ls(p):
    """Least-squares slope per series; returns ``(TrendFit, y - b t)``.

    The slope is ``sum (t - T/2)(y_t - ybar) / sum (t - T/2)^2`` over
    ``t = 0..T``. The intercept is left in the data.
    """
    y = as_matrix(p)
    T = y.shape[1] - 1
    if T < 2:
        raise DataError("least-squares detrending needs T >= 2")
    t = np.arange(T + 1, dtype=np.float64)
    tc = t - T / 2.0
    slope = (y - y.mean(axis=1, keepdims=True)) @ tc / (tc @ tc)
    return TrendFit(slope=slope, method="ls"), _wrap(p, y - np.outer(slope, t), getattr(p, "dates", None))


def detrend_demean(p):
    """Slope from the mean first difference, ``(y_T - y_0) / T``."""
    y = as_matrix(p)
    T = y.shape[1] - 1
    if T < 1:
        raise DataError("demeaning needs T >= 1")
    slope = (y[:, -1] - y[:, 0]) / T
    t = np.arange(T + 1, dtype=np.float64)
    return TrendFit(slope=slope, method="demean"), _wrap(p, y - np.outer(slope, t), getattr(p, "dates", None))


def detrend(p, method: str = "ls"):
    if method == "ls":
        return detrend_ls(p)
    if method == "demean":
        return detrend_demean(p)
    raise ValueError(f"unknown detrending method {method!r}")


# ---------------------------------------------------------------------------
# transforms and ingestion


def _quarter_key(label: str, frequency: str) -> str:
    """Map a date label to a ``YYYYQk`` bucket."""
    s = label.strip()
    if "q" in s.lower() and frequency == "quarterly":
        return s.upper()
    parts = s.replace("/", "-").split("-")
    if len(parts) < 2:
        raise DataError(f"cannot read a month from date label {label!r}")
    year, month = int(parts[0]), int(parts[1])
    return f"{year}Q{(month - 1) // 3 + 1}"


def to_quarterly(values: np.ndarray, dates: Sequence[str], frequency: str):
    """Average within calendar quarters.

    Returns ``(values, quarter_labels)``. Incomplete trailing or leading
    quarters are kept as averages of what is observed.
    """
    if frequency == "quarterly":
        return values, list(dates)
    keys = [_quarter_key(d, frequency) for d in dates]
    labels, groups = [], []
    for j, k in enumerate(keys):
        if not labels or labels[-1] != k:
            if k in labels:
                raise DataError(f"date labels are not in calendar order near {dates[j]!r}")
            labels.append(k)
            groups.append([])
        groups[-1].append(j)
    out = np.column_stack([values[:, g].mean(axis=1) for g in groups])
    return out, labels


def apply_transforms(raw: Panel) -> Panel:
    """Apply codes 1 (level), 2 (log) and 3 (log difference).

    Code-3 series lose their first observation; the whole panel is then
    trimmed to the common sample so the result stays rectangular.
    """
    x = raw.values
    if not np.all(np.isfinite(x)):
        raise DataError("panel contains non-finite values")
    codes = list(raw.transform_codes)
    rows = []
    for i, code in enumerate(codes):
        row = x[i]
        if code == 1:
            rows.append(row.copy())
        elif code in (2, 3):
            if np.any(row <= 0):
                raise DataError(
                    f"series {raw.series_names[i]!r} has non-positive values under log transform code {code}"
                )
            lr = np.log(row)
            rows.append(np.diff(lr) if code == 3 else lr)
        else:
            raise DataError(f"series {raw.series_names[i]!r}: unknown transform code {code}")
    length = min(len(r) for r in rows)
    if length < x.shape[1]:
        logger.info("trimming %d leading observation(s) to align log-differenced series", x.shape[1] - length)
    values = np.vstack([r[len(r) - length:] for r in rows])
    dates = raw.dates[len(raw.dates) - length:] if raw.dates is not None else None
    return replace(raw, values=values, dates=dates)


def read_transforms(path) -> dict:
    """Read a ``name,code`` sidecar file (header optional)."""
    codes = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            name, code = row[0].strip(), row[1].strip() if len(row) > 1 else ""
            if not code.isdigit():
                continue  # header row
            codes[name] = int(code)
    return codes


def _looks_numeric(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_panel_csv(path, transforms=None, frequency: str = "quarterly") -> Panel:
    """Read a CSV with one series per column.

    The header holds series names. A first column whose entries are not all
    numeric is treated as date labels. ``transforms`` is a mapping or a path
    to a sidecar file; series missing from it get code 1.
    """
    frequency = _FREQ_ALIASES.get(frequency.lower(), frequency.lower())
    if frequency not in FREQUENCIES:
        raise DataError(f"unknown frequency {frequency!r}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 3:
        raise DataError(f"{path}: need a header and at least two rows")
    header, body = rows[0], rows[1:]
    width = len(header)
    if any(len(r) != width for r in body):
        raise DataError(f"{path}: ragged rows (misaligned calendars?)")
    has_dates = not all(_looks_numeric(r[0]) for r in body if r[0].strip())  # blanks are missing values
    names = header[1:] if has_dates else header
    start = 1 if has_dates else 0
    try:
        values = np.array([[float(v) if v.strip() else math.nan for v in r[start:]] for r in body]).T
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    dates = [r[0] for r in body] if has_dates else None
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: missing or non-finite observations")
    if frequency != "quarterly":
        if dates is None:
            raise DataError("date labels are required to aggregate to quarterly")
        values, dates = to_quarterly(values, dates, frequency)
        frequency = "quarterly"
    if isinstance(transforms, (str, Path)):
        transforms = read_transforms(transforms)
    transforms = transforms or {}
    unknown = set(transforms) - set(names)
    if unknown:
        raise DataError(f"transform file names unknown series: {sorted(unknown)}")
    codes = [int(transforms.get(nm, 1)) for nm in names]
    return Panel(values, list(names), codes, frequency, dates)


def write_panel_csv(p: Panel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if p.dates is not None:
            w.writerow(["date", *p.series_names])
            for j, d in enumerate(p.dates):
                w.writerow([d, *(repr(float(v)) for v in p.values[:, j])])
        else:
            w.writerow(p.series_names)
            for j in range(p.values.shape[1]):
                w.writerow([repr(float(v)) for v in p.values[:, j]])


def write_transforms(p: Panel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "code"])
        for nm, c in zip(p.series_names, p.transform_codes):
            w.writerow([nm, c])
