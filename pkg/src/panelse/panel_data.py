"""Balanced panel container, CSV ingestion and the two-way within transform."""

from __future__ import annotations

import csv
import datetime as _dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exceptions import (
    AlreadyDemeaned,
    DuplicateCell,
    EmptyInput,
    MissingCell,
    ParseFailure,
    PanelDataError,
    ShapeMismatch,
)

__all__ = [
    "PanelData",
    "DemeanReport",
    "load_csv",
    "write_csv",
    "within_transform",
    "demean_array",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PanelData:
    """Balanced N x T panel with k regressors.

    ``y`` has shape (N, T) and ``x`` has shape (N, T, k): row i is unit i,
    column t is period t.  Arrays are copied and made read-only.
    """

    y: np.ndarray
    x: np.ndarray
    unit_labels: tuple = ()
    time_labels: tuple = ()
    regressor_names: tuple = ()
    demeaned: bool = False
    n_units: int = field(init=False)
    n_periods: int = field(init=False)
    n_regressors: int = field(init=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        if y.ndim != 2:
            raise ShapeMismatch(f"y must be 2-D (N, T), got shape {y.shape}")
        if x.ndim == 2:
            x = x[:, :, None]
        if x.ndim != 3 or x.shape[:2] != y.shape:
            raise ShapeMismatch(
                f"x must have shape (N, T, k) matching y {y.shape}, got {x.shape}"
            )
        n, t = y.shape
        k = x.shape[2]
        if n == 0 or t == 0 or k == 0:
            raise EmptyInput("panel must have at least one unit, period and regressor")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise PanelDataError("panel values must all be finite")

        units = tuple(self.unit_labels) or tuple(str(i) for i in range(n))
        times = tuple(self.time_labels) or tuple(range(t))
        names = tuple(self.regressor_names) or tuple(f"x{j + 1}" for j in range(k))
        if len(units) != n or len(times) != t or len(names) != k:
            raise ShapeMismatch("label lengths do not match the panel dimensions")
        if len(set(units)) != n:
            raise DuplicateCell("unit labels must be unique")
        if any(not (a < b) for a, b in zip(times, times[1:])):
            raise PanelDataError("time labels must be strictly increasing")

        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "unit_labels", units)
        object.__setattr__(self, "time_labels", times)
        object.__setattr__(self, "regressor_names", names)
        object.__setattr__(self, "n_units", n)
        object.__setattr__(self, "n_periods", t)
        object.__setattr__(self, "n_regressors", k)

    @property
    def shape(self):
        return self.n_units, self.n_periods, self.n_regressors

    def replace(self, **changes) -> "PanelData":
        kw = dict(
            y=self.y,
            x=self.x,
            unit_labels=self.unit_labels,
            time_labels=self.time_labels,
            regressor_names=self.regressor_names,
            demeaned=self.demeaned,
        )
        kw.update(changes)
        return PanelData(**kw)


@dataclass(frozen=True)
class DemeanReport:
    """Means removed by :func:`within_transform`.

    Column 0 is the outcome, columns 1..k the regressors.
    """

    unit_means: np.ndarray
    time_means: np.ndarray
    grand_mean: np.ndarray


def demean_array(z: np.ndarray) -> np.ndarray:
    """Two-way within transform of an (N, T) or (N, T, k) array."""
    z = np.asarray(z, dtype=np.float64)
    return (
        z
        - z.mean(axis=1, keepdims=True)
        - z.mean(axis=0, keepdims=True)
        + z.mean(axis=(0, 1), keepdims=True)
    )


def within_transform(data: PanelData) -> tuple[PanelData, DemeanReport]:
    """Remove unit and time fixed effects by two-way demeaning.

    Every series z becomes ``z_it - mean_i(z) - mean_t(z) + mean(z)``.

    Raises
    ------
    AlreadyDemeaned
        If ``data.demeaned`` is already set.
    """
    if data.demeaned:
        raise AlreadyDemeaned("panel has already been within-transformed")
    z = np.concatenate([data.y[:, :, None], data.x], axis=2)
    report = DemeanReport(
        unit_means=_frozen(z.mean(axis=1)),
        time_means=_frozen(z.mean(axis=0)),
        grand_mean=_frozen(z.mean(axis=(0, 1))),
    )
    zt = demean_array(z)
    out = data.replace(y=zt[:, :, 0], x=zt[:, :, 1:], demeaned=True)
    return out, report


# -- CSV ---------------------------------------------------------------------

DEFAULT_SCHEMA = {"unit": "unit", "time": "time", "y": "y"}


def _parse_time_labels(raw: Sequence[str], rows: Sequence[int]):
    try:
        return [int(v) for v in raw]
    except ValueError:
        pass
    out = []
    for v, r in zip(raw, rows):
        try:
            out.append(_dt.date.fromisoformat(v))
        except ValueError:
            raise ParseFailure(
                f"row {r}: time label {v!r} is neither an integer nor an ISO date "
                "(all labels must share one kind)",
                row=r,
            ) from None
    return out


def _parse_float(value: str, row: int, column: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ParseFailure(
            f"row {row}: column {column!r} value {value!r} is not numeric", row=row
        ) from None
    if not math.isfinite(out):
        raise ParseFailure(
            f"row {row}: column {column!r} value {value!r} is not finite", row=row
        )
    return out


def load_csv(path, schema: Mapping | None = None) -> PanelData:
    """Read a long-format balanced panel.

    Parameters
    ----------
    path : path-like
        CSV file with a header row.
    schema : mapping, optional
        Keys ``unit``, ``time``, ``y`` name the corresponding columns
        (defaults ``unit``, ``time``, ``y``); key ``x`` lists regressor
        columns.  Without ``x`` every remaining column is a regressor.

    Row numbers in error messages count the header as row 1.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyInput(f"{path}: file is empty") from None
        records = [(i + 2, row) for i, row in enumerate(reader) if any(c.strip() for c in row)]
    if not records:
        raise EmptyInput(f"{path}: no data rows")

    ucol, tcol, ycol = schema["unit"], schema["time"], schema["y"]
    xcols = schema.get("x")
    if xcols is None:
        xcols = [h for h in header if h not in (ucol, tcol, ycol)]
    elif isinstance(xcols, str):
        xcols = [c.strip() for c in xcols.split(",") if c.strip()]
    xcols = list(xcols)
    missing = [c for c in [ucol, tcol, ycol, *xcols] if c not in header]
    if missing:
        raise ParseFailure(f"{path}: missing column(s) {missing} in header {header}", row=1)
    if not xcols:
        raise ParseFailure(f"{path}: no regressor columns", row=1)
    idx = {h: j for j, h in enumerate(header)}

    units, times_raw, rownums, values = [], [], [], []
    for r, row in records:
        if len(row) != len(header):
            raise ParseFailure(
                f"row {r}: expected {len(header)} fields, got {len(row)}", row=r
            )
        units.append(row[idx[ucol]].strip())
        times_raw.append(row[idx[tcol]].strip())
        rownums.append(r)
        values.append(
            [_parse_float(row[idx[c]].strip(), r, c) for c in [ycol, *xcols]]
        )
    times = _parse_time_labels(times_raw, rownums)

    unit_order = list(dict.fromkeys(units))
    time_order = sorted(set(times))
    uix = {u: i for i, u in enumerate(unit_order)}
    tix = {t: j for j, t in enumerate(time_order)}
    n, t, k = len(unit_order), len(time_order), len(xcols)
    z = np.empty((n, t, k + 1))
    seen = np.zeros((n, t), dtype=np.int64)
    for u, tm, r, vals in zip(units, times, rownums, values):
        i, j = uix[u], tix[tm]
        if seen[i, j]:
            raise DuplicateCell(
                f"row {r}: duplicate cell (unit={u!r}, time={tm}) first seen in row {seen[i, j]}",
                unit=u,
                time=tm,
                row=r,
            )
        seen[i, j] = r
        z[i, j] = vals
    holes = np.argwhere(seen == 0)
    if holes.size:
        i, j = holes[0]
        u, tm = unit_order[i], time_order[j]
        raise MissingCell(
            f"unbalanced panel: no row for (unit={u!r}, time={tm}); "
            f"{len(holes)} cell(s) missing",
            unit=u,
            time=tm,
        )
    return PanelData(
        y=z[:, :, 0],
        x=z[:, :, 1:],
        unit_labels=tuple(unit_order),
        time_labels=tuple(time_order),
        regressor_names=tuple(xcols),
    )


def write_csv(data: PanelData, path, schema: Mapping | None = None) -> None:
    """Write ``data`` in long format at full (round-trip) float precision."""
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    xcols = list(schema.get("x") or data.regressor_names)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([schema["unit"], schema["time"], schema["y"], *xcols])
        for i, u in enumerate(data.unit_labels):
            for j, tm in enumerate(data.time_labels):
                tl = tm.isoformat() if isinstance(tm, _dt.date) else tm
                w.writerow(
                    [u, tl, repr(float(data.y[i, j]))]
                    + [repr(float(v)) for v in data.x[i, j]]
                )
