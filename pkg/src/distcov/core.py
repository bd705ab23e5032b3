"""
Distance covariance estimators.

Given distance matrices ``a`` (of X) and ``b`` (of Y), double centering
yields ``A`` and ``B`` and the squared sample distance covariance is the
average of the ``n**2`` products ``A_kl * B_kl``. On top of that V-statistic
this module provides the normaliser ``T2`` (product of mean distances), the
unbiased estimator ``U_n`` and the corrected distance correlation ``C_n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateSampleError,
    DimensionMismatchError,
    DomainError,
    InternalConsistencyError,
)
from .metrics import DistanceMatrix, validate_distance_matrix

_RN2_SLACK = 1e-9


@dataclass(frozen=True)
class CenteredDistances:
    """Double-centred distance matrix plus the grand mean of the original."""

    A: np.ndarray = field(repr=False)
    grand_mean: float
    n: int

    def permuted(self, perm) -> "CenteredDistances":
        """Jointly permute rows and columns.

        Double centering commutes with joint permutation, so this equals
        centring the permuted distance matrix.
        """
        perm = np.asarray(perm)
        return CenteredDistances(self.A[np.ix_(perm, perm)], self.grand_mean, self.n)


@dataclass(frozen=True)
class DcovEstimates:
    """V-statistic quantities for a pair of samples."""

    vn2: float
    dvar_x: float
    dvar_y: float
    rn2: float
    t2: float
    n: int

    @property
    def rn(self) -> float:
        """Distance correlation (square root of ``rn2``)."""
        return math.sqrt(max(self.rn2, 0.0))


@dataclass(frozen=True)
class UnbiasedEstimates:
    """Unbiased distance covariances and the corrected correlation.

    For ``n <= 2`` the ``un_*`` fields are NaN (undefined) and ``cn`` is 1.
    """

    un_xy: float
    un_xx: float
    un_yy: float
    cn: float
    n: int


def _entries(d) -> np.ndarray:
    if isinstance(d, DistanceMatrix):
        return d.entries
    return validate_distance_matrix(d).entries


def _check_same_n(nx: int, ny: int) -> None:
    if nx != ny:
        raise DimensionMismatchError(f"sample sizes differ: {nx} != {ny}")


def double_center(d) -> CenteredDistances:
    """Double-centre a distance matrix.

    ``A_kl = d_kl - mean_k - mean_l + mean`` where ``mean_k`` is the k-th row
    (equivalently column) mean. The row means are reused for the columns and
    added before subtraction, which keeps ``A`` exactly symmetric.
    """
    a = _entries(d)
    n = a.shape[0]
    row = a.mean(axis=1)
    grand = float(a.mean())
    A = (a - (row[:, np.newaxis] + row[np.newaxis, :])) + grand
    A.setflags(write=False)
    return CenteredDistances(A, grand, n)


def _as_centered(x) -> CenteredDistances:
    if isinstance(x, CenteredDistances):
        return x
    return double_center(x)


def v_dcov2(Ax, By) -> float:
    """Squared distance covariance V-statistic, ``mean(A * B)``.

    Accepts :class:`CenteredDistances` or distance matrices (centred here).
    """
    Ax, By = _as_centered(Ax), _as_centered(By)
    _check_same_n(Ax.n, By.n)
    return _mean_product(Ax.A, By.A)


def _mean_product(A: np.ndarray, B: np.ndarray) -> float:
    # np.sum over a contiguous 1-d buffer uses pairwise summation.
    return float(np.sum((A * B).ravel()) / A.size)


def t2(dx, dy) -> float:
    """Product of the mean pairwise distances of the two samples."""
    a, b = _entries(dx), _entries(dy)
    _check_same_n(a.shape[0], b.shape[0])
    return float(a.mean()) * float(b.mean())


def _rn2(vxy: float, vxx: float, vyy: float) -> float:
    denom = vxx * vyy
    if denom <= 0:
        return 0.0
    r = vxy / math.sqrt(denom)
    if not -_RN2_SLACK <= r <= 1 + _RN2_SLACK:
        raise InternalConsistencyError(f"squared distance correlation {r!r} outside [0, 1]")
    return r


def dcov_estimates(dx, dy) -> DcovEstimates:
    """All V-statistic quantities: ``V_n^2``, distance variances, ``R_n^2``, ``T2``."""
    a, b = _entries(dx), _entries(dy)
    _check_same_n(a.shape[0], b.shape[0])
    A, B = double_center(a), double_center(b)
    vxy = _mean_product(A.A, B.A)
    vxx = _mean_product(A.A, A.A)
    vyy = _mean_product(B.A, B.A)
    return DcovEstimates(
        vn2=vxy,
        dvar_x=vxx,
        dvar_y=vyy,
        rn2=_rn2(vxy, vxx, vyy),
        t2=A.grand_mean * B.grand_mean,
        n=A.n,
    )


def unbiased_dcov(vn2: float, t2val: float, n: int) -> float:
    """Unbiased estimator ``n^2/((n-1)(n-2)) * (V_n^2 - T2/(n-1))``.

    Raises
    ------
    DomainError
        If ``n < 3``.
    """
    if n < 3:
        raise DomainError(f"unbiased distance covariance needs n >= 3, got {n}")
    return n * n / ((n - 1) * (n - 2)) * (vn2 - t2val / (n - 1))


def _cn(uxy: float, uxx: float, uyy: float) -> float:
    denom = uxx * uyy
    if denom > 0:
        return uxy / math.sqrt(denom)
    return 0.0


def corrected_dcor(dx, dy) -> UnbiasedEstimates:
    """Corrected distance correlation built from unbiased estimators.

    ``C_n = U_n(X, Y) / sqrt(U_n(X) U_n(Y))`` when the denominator product is
    positive, 0 otherwise, and 1 by convention for ``n <= 2``. ``U_n(X, Y)``
    is not clamped, so ``C_n`` can be negative.
    """
    a, b = _entries(dx), _entries(dy)
    _check_same_n(a.shape[0], b.shape[0])
    n = a.shape[0]
    if n <= 2:
        nan = float("nan")
        return UnbiasedEstimates(nan, nan, nan, 1.0, n)
    A, B = double_center(a), double_center(b)
    gx, gy = A.grand_mean, B.grand_mean
    uxy = unbiased_dcov(_mean_product(A.A, B.A), gx * gy, n)
    uxx = unbiased_dcov(_mean_product(A.A, A.A), gx * gx, n)
    uyy = unbiased_dcov(_mean_product(B.A, B.A), gy * gy, n)
    return UnbiasedEstimates(uxy, uxx, uyy, _cn(uxy, uxx, uyy), n)


def normalized_stats(vn2: float, un: float | None, t2val: float, n: int) -> tuple[float, float]:
    """Return ``(n V_n^2 / T2, n U_n / T2)``.

    ``un`` may be ``None``, in which case it is computed from ``vn2``.

    Raises
    ------
    DegenerateSampleError
        If ``t2val <= 0`` (one of the samples is constant).
    DomainError
        If ``n < 3``.
    """
    if n < 3:
        raise DomainError(f"normalised statistics need n >= 3, got {n}")
    if not t2val > 0:
        raise DegenerateSampleError(f"T2 = {t2val!r}: a sample has zero mean distance")
    if un is None:
        un = unbiased_dcov(vn2, t2val, n)
    return n * vn2 / t2val, n * un / t2val


# Batched helpers over stacks of matrices, shape (reps, n, n). Used by the
# simulation harness; each slice matches the scalar functions above.

def _center_stack(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    row = d.mean(axis=2)
    grand = d.mean(axis=(1, 2))
    A = (d - (row[:, :, np.newaxis] + row[:, np.newaxis, :])) + grand[:, np.newaxis, np.newaxis]
    return A, grand


def batch_estimates(dx: np.ndarray, dy: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorised V- and U-statistics for stacks of distance matrices.

    Returns a dict of 1-d arrays keyed ``vn2, dvar_x, dvar_y, rn2, t2`` and,
    when ``n >= 3``, ``un_xy, un_xx, un_yy, cn``.
    """
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    if dx.shape != dy.shape:
        raise DimensionMismatchError(f"stack shapes differ: {dx.shape} != {dy.shape}")
    n = dx.shape[-1]
    A, gx = _center_stack(dx)
    B, gy = _center_stack(dy)
    size = n * n
    vxy = np.sum((A * B).reshape(len(A), -1), axis=1) / size
    vxx = np.sum((A * A).reshape(len(A), -1), axis=1) / size
    vyy = np.sum((B * B).reshape(len(B), -1), axis=1) / size
    denom = vxx * vyy
    with np.errstate(invalid="ignore", divide="ignore"):
        rn2 = np.where(denom > 0, vxy / np.sqrt(np.where(denom > 0, denom, 1.0)), 0.0)
    out = {"vn2": vxy, "dvar_x": vxx, "dvar_y": vyy, "rn2": rn2, "t2": gx * gy}
    if n >= 3:
        c = n * n / ((n - 1) * (n - 2))
        uxy = c * (vxy - gx * gy / (n - 1))
        uxx = c * (vxx - gx * gx / (n - 1))
        uyy = c * (vyy - gy * gy / (n - 1))
        ud = uxx * uyy
        out.update(
            un_xy=uxy,
            un_xx=uxx,
            un_yy=uyy,
            cn=np.where(ud > 0, uxy / np.sqrt(np.where(ud > 0, ud, 1.0)), 0.0),
        )
    return out
