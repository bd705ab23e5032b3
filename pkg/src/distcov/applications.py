"""
Applied procedures built on the permutation test.

* Test of nonlinearity: fit ``Y = X beta + eps`` by least squares (with an
  intercept; ``Y`` may be multivariate) and test the regressors against the
  residuals for independence. Least-squares residuals are orthogonal to the
  regressors while permuted residuals are not, so by default every replicate
  refits the model to permuted residuals before computing the statistic.
* Serial distance correlation: corrected distance correlation between a
  series and its lag-``h`` shift, with a permutation p-value that treats the
  overlapping pairs as exchangeable. That p-value is approximate.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from .core import corrected_dcor, double_center
from .exceptions import DataError, DimensionMismatchError, ModelError
from .inference import (
    Method,
    PermutationPlan,
    TestResult,
    permutation_p_value,
    permutation_test,
    run_replicates,
    statistic_value,
)
from .metrics import _frozen, euclidean_distances

#: Relative singular value threshold below which a direction is rank deficient.
RANK_RTOL = 1e-10

# Residuals this small relative to the response are treated as exactly zero.
_ZERO_RESID_RTOL = 1e-10


@dataclass(frozen=True)
class LinearModelFit:
    """Least-squares fit; ``coefficients`` has the intercept as row 0."""

    coefficients: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SerialResult:
    lag: int
    effective_n: int
    dcor: float
    p_value: float
    replicates: int
    approximate: bool = True

    def to_dict(self) -> dict:
        return {
            "lag": self.lag,
            "effective_n": self.effective_n,
            "dcor": self.dcor,
            "p_value": self.p_value,
            "replicates": self.replicates,
            "approximate": self.approximate,
        }


def _as_2d(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, np.newaxis]
    if arr.ndim != 2:
        raise DataError(f"{name} must be 1-d or 2-d")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} has non-finite values")
    return arr


def _check_model_shape(X: np.ndarray, Y: np.ndarray) -> None:
    n, p = X.shape
    if Y.shape[0] != n:
        raise DimensionMismatchError(f"X has {n} rows but Y has {Y.shape[0]}")
    if n <= p + 1:
        raise ModelError(f"need n > p + 1 observations, got n={n}, p={p}")


def fit_least_squares(X, Y, names: Sequence[str] | None = None) -> LinearModelFit:
    """Least-squares fit of ``Y`` on ``[1, X]``.

    The design rank is determined by a column-pivoted QR decomposition; a
    pivot whose magnitude is below ``RANK_RTOL`` times the largest is
    treated as zero.

    Raises
    ------
    ModelError
        If ``n <= p + 1`` or the design is rank deficient. The message names
        the columns that are linearly dependent on the others.
    """
    X = _as_2d(X, "X")
    Y = _as_2d(Y, "Y")
    _check_model_shape(X, Y)
    design, Q, R, piv = _design_qr(X, names)
    coef_piv = scipy.linalg.solve_triangular(R, Q.T @ Y)
    coef = np.empty_like(coef_piv)
    coef[piv] = coef_piv
    fitted = design @ coef
    resid = Y - fitted
    return LinearModelFit(coefficients=coef, residuals=resid, fitted=fitted)


def _design_qr(X: np.ndarray, names=None):
    n, p = X.shape
    design = np.column_stack([np.ones(n), X])
    labels = ["intercept"] + list(names or [f"x{j}" for j in range(p)])
    Q, R, piv = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.count_nonzero(diag > RANK_RTOL * diag[0])) if diag[0] > 0 else 0
    if rank < design.shape[1]:
        bad = [labels[j] for j in piv[rank:]]
        raise ModelError(f"design matrix is rank deficient; dependent columns: {', '.join(bad)}")
    return design, Q, R, piv


def nonlinearity_test(
    X,
    Y,
    plan: PermutationPlan | None = None,
    threads: int | None = None,
    procedure: str = "refit",
) -> TestResult:
    """Distance covariance test of a linear model's adequacy.

    Tests independence of the rows of ``X`` and the residual rows of the
    least-squares fit of ``Y`` on ``[1, X]``.

    Parameters
    ----------
    X : array_like, shape (n, p)
    Y : array_like, shape (n,) or (n, q)
    plan : PermutationPlan, optional
    threads : int, optional
    procedure : {"refit", "naive"}
        ``"refit"`` (default): replicate ``b`` permutes the residuals, refits
        the model to them and uses the new residuals, so replicates share
        the orthogonality to ``X`` that the observed residuals have. The
        ``X`` distances are computed once. ``"naive"``: permute the observed
        residual distances directly, as in :func:`permutation_test`; this is
        markedly conservative because permuted residuals are no longer
        orthogonal to ``X``.

    Returns
    -------
    TestResult
        Marked ``approximate``. When the residuals vanish (an exact linear
        relation) the statistic is reported as 0 with p-value 1 rather than
        dividing by a zero normaliser.
    """
    plan = plan or PermutationPlan()
    X = _as_2d(X, "X")
    Y = _as_2d(Y, "Y")
    _check_model_shape(X, Y)
    _, Q, _, _ = _design_qr(X)
    resid = Y - Q @ (Q.T @ Y)
    scale = max(1.0, float(np.max(np.abs(Y))))
    if float(np.max(np.abs(resid))) <= _ZERO_RESID_RTOL * scale:
        return TestResult(
            statistic_name=plan.statistic.value,
            statistic_value=0.0,
            p_value=1.0,
            method=Method.PERMUTATION.value,
            replicates=int(plan.replicates),
            seed=int(plan.seed),
            approximate=True,
        )
    dx = euclidean_distances(X, threads=threads)
    if procedure == "naive":
        result = permutation_test(dx, euclidean_distances(resid, threads=threads), plan, threads=threads)
        return replace(result, approximate=True)
    if procedure != "refit":
        raise ValueError(f"procedure must be 'refit' or 'naive', got {procedure!r}")

    A = double_center(dx)

    def stat(r: np.ndarray) -> float:
        return statistic_value(plan.statistic, A, double_center(_pairwise(r)))

    def replicate(perm: np.ndarray) -> float:
        e = resid[perm]
        return stat(e - Q @ (Q.T @ e))

    observed = stat(resid)
    reps = run_replicates(A.n, plan, replicate, threads)
    return TestResult(
        statistic_name=plan.statistic.value,
        statistic_value=float(observed),
        p_value=permutation_p_value(observed, reps),
        method=Method.PERMUTATION.value,
        replicates=int(plan.replicates),
        seed=int(plan.seed),
        approximate=True,
    )


def _pairwise(r: np.ndarray):
    # Exactly symmetric with zero diagonal, so validation is skipped.
    if r.shape[1] == 1:
        v = r[:, 0]
        return _frozen(np.abs(v[:, np.newaxis] - v[np.newaxis, :]))
    diff = r[:, np.newaxis, :] - r[np.newaxis, :, :]
    return _frozen(np.sqrt(np.sum(diff * diff, axis=-1)))


def _lag_pairs(series: np.ndarray, lag: int) -> tuple[np.ndarray, np.ndarray]:
    n = series.shape[0]
    return series[: n - lag], series[lag:]


def serial_dcor(series, max_lag: int, plan: PermutationPlan | None = None, threads: int | None = None) -> list[SerialResult]:
    """Serial corrected distance correlation for lags ``1..max_lag``.

    Parameters
    ----------
    series : array_like, shape (n,) or (n, d)
    max_lag : int
        At most ``n - 3`` so every lag keeps three pairs.
    plan : PermutationPlan, optional

    Returns
    -------
    list of SerialResult
    """
    plan = plan or PermutationPlan()
    z = _as_2d(series, "series")
    n = z.shape[0]
    if max_lag < 1:
        raise DataError(f"max_lag must be >= 1, got {max_lag}")
    if max_lag > n - 3:
        raise DataError(f"series of length {n} is too short for max_lag={max_lag} (need max_lag <= n - 3)")
    return [_serial_one(z, h, plan, threads) for h in range(1, max_lag + 1)]


def _serial_one(z: np.ndarray, lag: int, plan: PermutationPlan, threads) -> SerialResult:
    x, y = _lag_pairs(z, lag)
    dx = euclidean_distances(x, threads=threads)
    dy = euclidean_distances(y, threads=threads)
    dcor = corrected_dcor(dx, dy).cn
    test = permutation_test(dx, dy, plan, threads=threads)
    return SerialResult(
        lag=lag,
        effective_n=x.shape[0],
        dcor=dcor,
        p_value=test.p_value,
        replicates=test.replicates,
    )
