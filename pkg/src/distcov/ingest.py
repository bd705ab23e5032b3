"""CSV ingestion for the command line tool."""
from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import DataError
from .metrics import Sample


class UsageError(Exception):
    """Bad command line usage (exit code 1)."""


def parse_columns(spec: str | Sequence[str] | None) -> list[str]:
    if spec is None:
        return []
    if isinstance(spec, str):
        spec = spec.split(",")
    cols = [c.strip() for c in spec if c.strip()]
    return cols


def read_table(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    """Header and data rows of an RFC 4180 style CSV file."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if not header or any(not h for h in header):
            raise DataError(f"{path}: header row has empty column names")
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        rows = [r for r in reader if r]
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}")
    return header, rows


def _select(header: list[str], rows: list[list[str]], cols: list[str], path) -> list[list[str]]:
    missing = [c for c in cols if c not in header]
    if missing:
        raise DataError(f"{path}: unknown column(s) {', '.join(missing)}; header is {', '.join(header)}")
    idx = [header.index(c) for c in cols]
    return [[row[i].strip() for i in idx] for row in rows]


def _numeric(values: list[list[str]], cols: list[str], path) -> np.ndarray:
    out = np.empty((len(values), len(cols)))
    for j, col in enumerate(cols):
        bad = []
        for i, row in enumerate(values):
            try:
                out[i, j] = float(row[j])
            except ValueError:
                bad.append(i + 2)
        if bad:
            kind = "non-numeric" if len(bad) == len(values) else "mixed numeric and non-numeric"
            raise DataError(
                f"{path}: column {col!r} is {kind} (lines {', '.join(map(str, bad[:20]))}); "
                "use --metric discrete for categorical data"
            )
    return out


def ingest_csv(path, x_cols, y_cols, metric: str = "euclidean") -> tuple[Sample, Sample]:
    """Read two samples from the selected columns of one CSV file.

    Parameters
    ----------
    path : path-like
        CSV with a header row.
    x_cols, y_cols : str or sequence of str
        Column names, comma separated when given as a string. Must be
        disjoint.
    metric : {"euclidean", "discrete"}
        ``discrete`` reads the selected columns as categorical labels (a row
        of several columns becomes one tuple label).

    Raises
    ------
    UsageError
        Column selections empty or overlapping.
    DataError
        Missing file, bad header, missing values (all offending lines are
        listed) or non-numeric values under the Euclidean metric.
    """
    xs, ys = parse_columns(x_cols), parse_columns(y_cols)
    if not xs or not ys:
        raise UsageError("both --x-cols and --y-cols are required")
    overlap = sorted(set(xs) & set(ys))
    if overlap:
        raise UsageError(f"x and y columns overlap: {', '.join(overlap)}")
    header, rows = read_table(path)
    x_raw = _select(header, rows, xs, path)
    y_raw = _select(header, rows, ys, path)
    empty = [i + 2 for i, (xr, yr) in enumerate(zip(x_raw, y_raw)) if any(v == "" for v in xr + yr)]
    if empty:
        raise DataError(f"{path}: missing values in selected columns at lines {', '.join(map(str, empty))}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    if metric == "discrete":
        as_label = lambda r: r[0] if len(r) == 1 else tuple(r)
        return Sample.labels([as_label(r) for r in x_raw]), Sample.labels([as_label(r) for r in y_raw])
    return Sample.numeric(_numeric(x_raw, xs, path)), Sample.numeric(_numeric(y_raw, ys, path))


def ingest_columns(path, cols) -> np.ndarray:
    """Numeric ``(n, len(cols))`` array from the named columns."""
    cs = parse_columns(cols)
    if not cs:
        raise UsageError("at least one column must be selected")
    header, rows = read_table(path)
    raw = _select(header, rows, cs, path)
    empty = [i + 2 for i, r in enumerate(raw) if any(v == "" for v in r)]
    if empty:
        raise DataError(f"{path}: missing values in selected columns at lines {', '.join(map(str, empty))}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = _numeric(raw, cs, path)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: non-finite values in selected columns")
    return arr
