"""
Distance matrices.

Every statistic in this package is a function of two pairwise distance
matrices only, so a sample from any metric space can be used once its
distances are available. This module builds those matrices (Euclidean for
numeric data, 0/1 for categorical labels) and validates precomputed ones.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Sequence

import numpy as np

from .exceptions import (
    AsymmetryError,
    DataError,
    EmptySampleError,
    NegativeDistanceError,
    NonFiniteError,
    NonzeroDiagonalError,
    NotSquareError,
)

#: Absolute tolerance for symmetry and zero-diagonal checks.
VALIDATION_TOL = 1e-9

# Upper bound on the temporary (rows, n, p) difference array per block.
_BLOCK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class Sample:
    """An ordered sample of ``n`` observations.

    Numeric samples hold an ``(n, p)`` float array; categorical samples hold
    a tuple of hashable labels and have ``p = None``.
    """

    observations: np.ndarray | tuple[Hashable, ...]
    categorical: bool = False

    @classmethod
    def numeric(cls, data) -> "Sample":
        arr = np.asarray(data, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, np.newaxis]
        if arr.ndim != 2:
            raise DataError(f"numeric sample must be 1-d or 2-d, got ndim={arr.ndim}")
        if arr.shape[0] < 1:
            raise EmptySampleError("sample has no observations")
        if arr.shape[1] < 1:
            raise DataError("numeric observations need dimension p >= 1")
        if not np.all(np.isfinite(arr)):
            bad = np.unique(np.nonzero(~np.isfinite(arr))[0])
            raise NonFiniteError(f"non-finite values in observations {bad.tolist()}")
        arr = np.array(arr, dtype=float, copy=True)
        arr.setflags(write=False)
        return cls(arr, categorical=False)

    @classmethod
    def labels(cls, data: Sequence[Hashable]) -> "Sample":
        labels = tuple(data)
        if not labels:
            raise EmptySampleError("sample has no observations")
        return cls(labels, categorical=True)

    @property
    def n(self) -> int:
        return len(self.observations)

    @property
    def p(self) -> int | None:
        if self.categorical:
            return None
        return int(self.observations.shape[1])


@dataclass(frozen=True)
class DistanceMatrix:
    """Validated ``n x n`` distance matrix.

    Symmetric, zero diagonal, nonnegative and finite. Instances are only
    produced by the constructors in this module; ``entries`` is read-only.
    """

    entries: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def permuted(self, perm) -> "DistanceMatrix":
        """Reorder observations: rows and columns are permuted jointly."""
        perm = np.asarray(perm)
        return _frozen(self.entries[np.ix_(perm, perm)])


def _frozen(entries: np.ndarray) -> DistanceMatrix:
    entries = np.ascontiguousarray(entries, dtype=float)
    entries.setflags(write=False)
    return DistanceMatrix(entries)


def _rows_block(x: np.ndarray, start: int, stop: int) -> np.ndarray:
    diff = x[start:stop, np.newaxis, :] - x[np.newaxis, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def euclidean_distances(sample, threads: int | None = None) -> DistanceMatrix:
    """Pairwise Euclidean distances between the rows of a numeric sample.

    Parameters
    ----------
    sample : Sample or array_like
        Numeric sample; a 1-d array is read as ``n`` scalar observations.
    threads : int, optional
        Number of worker threads over row blocks. Every entry is computed
        independently, so the result is bit-identical for any value.

    Returns
    -------
    DistanceMatrix
    """
    if not isinstance(sample, Sample):
        sample = Sample.numeric(sample)
    if sample.categorical:
        raise DataError("euclidean_distances needs a numeric sample")
    x = sample.observations
    n, p = x.shape
    rows = max(1, _BLOCK_ELEMENTS // max(1, n * p))
    bounds = [(s, min(s + rows, n)) for s in range(0, n, rows)]
    out = np.empty((n, n))
    threads = resolve_threads(threads)

    def work(b):
        out[b[0]:b[1]] = _rows_block(x, *b)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, bounds))
    else:
        for b in bounds:
            work(b)
    # (x_k - x_l)^2 == (x_l - x_k)^2 exactly, so no symmetrisation is needed.
    np.fill_diagonal(out, 0.0)
    return _frozen(out)


def discrete_distances(sample) -> DistanceMatrix:
    """0/1 distances between categorical labels (0 iff labels are equal)."""
    if not isinstance(sample, Sample):
        sample = Sample.labels(sample)
    labels = sample.observations
    if not sample.categorical:
        labels = [tuple(row) for row in np.asarray(labels)]
    if len(labels) == 0:
        raise EmptySampleError("sample has no observations")
    codes = _relabel(labels)
    out = (codes[:, np.newaxis] != codes[np.newaxis, :]).astype(float)
    return _frozen(out)


def _relabel(labels) -> np.ndarray:
    index: dict = {}
    return np.array([index.setdefault(lab, len(index)) for lab in labels], dtype=np.intp)


def validate_distance_matrix(raw) -> DistanceMatrix:
    """Check a precomputed matrix and return it as a :class:`DistanceMatrix`.

    The matrix must be square, finite, symmetric and zero on the diagonal
    (both within an absolute ``1e-9``) and nonnegative. After the checks it
    is canonicalised: symmetrised to ``(M + M.T) / 2`` with the diagonal set
    to exactly zero.

    Raises
    ------
    NotSquareError, NonFiniteError, AsymmetryError, NonzeroDiagonalError,
    NegativeDistanceError
    """
    if isinstance(raw, DistanceMatrix):
        return raw
    m = np.asarray(raw, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSquareError(f"distance matrix must be square, got shape {m.shape}")
    if m.shape[0] == 0:
        raise EmptySampleError("distance matrix is empty")
    if not np.all(np.isfinite(m)):
        k, l = np.argwhere(~np.isfinite(m))[0]
        raise NonFiniteError(f"non-finite distance at ({k}, {l})")
    asym = np.abs(m - m.T)
    if asym.max() > VALIDATION_TOL:
        k, l = np.unravel_index(np.argmax(asym), asym.shape)
        raise AsymmetryError(
            f"entries ({k}, {l}) and ({l}, {k}) differ by {asym[k, l]:.3g}"
        )
    diag = np.abs(np.diagonal(m))
    if diag.max() > VALIDATION_TOL:
        k = int(np.argmax(diag))
        raise NonzeroDiagonalError(f"diagonal entry {k} is {m[k, k]:.3g}")
    if m.min() < 0:
        k, l = np.unravel_index(np.argmin(m), m.shape)
        raise NegativeDistanceError(f"negative distance {m[k, l]:.3g} at ({k}, {l})")
    out = (m + m.T) / 2
    np.fill_diagonal(out, 0.0)
    return _frozen(out)


def distances_for(sample: Sample, threads: int | None = None) -> DistanceMatrix:
    """Euclidean distances for numeric samples, 0/1 for categorical ones."""
    if sample.categorical:
        return discrete_distances(sample)
    return euclidean_distances(sample, threads=threads)


def read_distance_csv(path: str | os.PathLike) -> DistanceMatrix:
    """Load a square, header-less, comma separated distance matrix."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise NotSquareError(f"{path}: rows have differing lengths {sorted(widths)}")
    return validate_distance_matrix(np.array(rows, dtype=float))


def resolve_threads(threads: int | None) -> int:
    """Thread cap: explicit value, else ``DISTCOV_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("DISTCOV_THREADS", "").strip()
        threads = int(env) if env else 1
    return max(1, int(threads))
