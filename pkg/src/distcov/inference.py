"""
Independence tests.

The permutation test never recomputes distances: re-pairing the samples is
a joint permutation of the rows and columns of the centred Y matrix ``B``,
and the statistic is re-evaluated from ``A`` and the permuted ``B``.

Each replicate draws its permutation from its own counter-based stream,
``Philox(key=(seed, replicate))``, so the result does not depend on how the
replicates are scheduled across threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

import numpy as np

from .core import (
    CenteredDistances,
    _cn,
    _entries,
    _mean_product,
    double_center,
    unbiased_dcov,
)
from .exceptions import DataError, DegenerateSampleError, DimensionMismatchError, DomainError
from .metrics import resolve_threads

# Replicate statistics within this relative distance of the observed value
# count as ties (guards against summation-order noise).
TIE_RTOL = 1e-12

_UINT64 = (1 << 64) - 1


class Statistic(str, Enum):
    NV2_OVER_T2 = "nV2_over_T2"
    NCN = "nCn"
    CN = "Cn"
    VN2 = "Vn2"


class Method(str, Enum):
    PERMUTATION = "permutation"
    NORMAL_HIGHDIM = "normal_highdim"


@dataclass(frozen=True)
class PermutationPlan:
    """Number of replicates, seed and which statistic to permute."""

    replicates: int = 999
    seed: int = 0
    statistic: Statistic | str = Statistic.NV2_OVER_T2

    def __post_init__(self):
        if int(self.replicates) < 1:
            raise DataError(f"replicates must be >= 1, got {self.replicates}")
        if not 0 <= int(self.seed) <= _UINT64:
            raise DataError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "statistic", Statistic(self.statistic))


@dataclass(frozen=True)
class TestResult:
    statistic_name: str
    statistic_value: float
    p_value: float
    method: str
    replicates: int
    seed: int
    approximate: bool = False

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "statistic_name": self.statistic_name,
            "statistic_value": self.statistic_value,
            "p_value": self.p_value,
            "replicates": self.replicates,
            "seed": self.seed,
        }


def replicate_permutation(seed: int, index: int, n: int) -> np.ndarray:
    """Uniform random permutation of ``range(n)`` for one replicate.

    Fisher-Yates shuffle driven by the stream keyed on ``(seed, index)``.
    """
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).permutation(n)


def _statistic_map(statistic: Statistic, A: CenteredDistances, B: CenteredDistances) -> Callable[[float], float]:
    """Map ``V_n^2(X, Y_perm)`` to the requested statistic.

    ``T2`` and the distance variances are permutation invariant, so every
    supported statistic is a fixed function of the permuted ``V_n^2``.
    """
    n = A.n
    t2val = A.grand_mean * B.grand_mean
    if statistic is Statistic.VN2:
        return lambda v: v
    if statistic is Statistic.NV2_OVER_T2:
        if not t2val > 0:
            raise DegenerateSampleError("T2 = 0: a sample is constant, nV2/T2 undefined")
        return lambda v: n * v / t2val
    uxx = unbiased_dcov(_mean_product(A.A, A.A), A.grand_mean**2, n)
    uyy = unbiased_dcov(_mean_product(B.A, B.A), B.grand_mean**2, n)
    scale = n if statistic is Statistic.NCN else 1
    return lambda v: scale * _cn(unbiased_dcov(v, t2val, n), uxx, uyy)


def replicate_vn2(A: CenteredDistances, B: CenteredDistances, perms: Iterable) -> np.ndarray:
    """``V_n^2`` between ``A`` and ``B`` jointly permuted by each of ``perms``."""
    return np.array([_mean_product(A.A, B.A[np.ix_(p, p)]) for p in perms], dtype=float)


def permutation_p_value(observed: float, replicate_stats) -> float:
    """Add-one p-value ``(1 + #{T_b >= T_obs}) / (B + 1)``."""
    reps = np.asarray(replicate_stats, dtype=float)
    threshold = observed - TIE_RTOL * abs(observed)
    return (1 + int(np.count_nonzero(reps >= threshold))) / (reps.size + 1)


def _prepare(dx, dy):
    a, b = _entries(dx), _entries(dy)
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(f"sample sizes differ: {a.shape[0]} != {b.shape[0]}")
    if a.shape[0] < 3:
        raise DomainError(f"permutation test needs n >= 3, got {a.shape[0]}")
    return double_center(a), double_center(b)


def statistic_value(statistic: Statistic | str, A: CenteredDistances, B: CenteredDistances) -> float:
    """Evaluate one test statistic from a pair of centred matrices."""
    return _statistic_map(Statistic(statistic), A, B)(_mean_product(A.A, B.A))


def run_replicates(
    n: int,
    plan: PermutationPlan,
    replicate: Callable[[np.ndarray], float],
    threads: int | None = None,
) -> np.ndarray:
    """Evaluate ``replicate(perm)`` for every replicate of ``plan``.

    Replicate ``i`` always sees ``replicate_permutation(plan.seed, i, n)``;
    chunking across threads only changes where it runs.
    """
    seed, reps = int(plan.seed), int(plan.replicates)

    def block(bounds):
        return [replicate(replicate_permutation(seed, i, n)) for i in range(*bounds)]

    threads = resolve_threads(threads)
    size = max(1, -(-reps // (4 * threads))) if threads > 1 else reps
    chunks = [(lo, min(lo + size, reps)) for lo in range(0, reps, size)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, chunks))
    else:
        parts = [block(c) for c in chunks]
    return np.array([v for part in parts for v in part], dtype=float)


def permutation_replicates(dx, dy, plan: PermutationPlan, threads: int | None = None) -> tuple[float, np.ndarray]:
    """Observed statistic and the array of replicate statistics."""
    A, B = _prepare(dx, dy)
    stat = _statistic_map(plan.statistic, A, B)
    observed = stat(_mean_product(A.A, B.A))
    reps = run_replicates(A.n, plan, lambda p: stat(_mean_product(A.A, B.A[np.ix_(p, p)])), threads)
    return observed, reps


def permutation_test(dx, dy, plan: PermutationPlan | None = None, threads: int | None = None) -> TestResult:
    """Permutation test of independence.

    Parameters
    ----------
    dx, dy : DistanceMatrix
        Distances within each sample, same order ``n >= 3``.
    plan : PermutationPlan, optional
        Defaults to 999 replicates of ``nV2_over_T2`` with seed 0.
    threads : int, optional
        Worker threads; the result is identical for any value.

    Returns
    -------
    TestResult
        ``p_value`` uses the add-one rule and is never 0.
    """
    plan = plan or PermutationPlan()
    observed, reps = permutation_replicates(dx, dy, plan, threads=threads)
    return TestResult(
        statistic_name=plan.statistic.value,
        statistic_value=float(observed),
        p_value=permutation_p_value(observed, reps),
        method=Method.PERMUTATION.value,
        replicates=int(plan.replicates),
        seed=int(plan.seed),
    )


def normal2_sf(x: float) -> float:
    """Upper tail of Normal(0, variance 2): ``erfc(x / 2) / 2``."""
    return 0.5 * math.erfc(x / 2.0)


def highdim_test(cn: float, n: int, tail: str = "upper") -> TestResult:
    """Compare ``n * C_n`` with Normal(0, variance 2).

    Intended for independent samples with ``(p + q) / n`` large and ``n``
    moderately large. ``tail`` is ``"upper"`` (default) or ``"two_sided"``.
    """
    if n < 3:
        raise DomainError(f"high-dimension rule needs n >= 3, got {n}")
    z = n * cn
    if tail == "upper":
        p = normal2_sf(z)
    elif tail == "two_sided":
        p = min(1.0, math.erfc(abs(z) / 2.0))
    else:
        raise ValueError(f"tail must be 'upper' or 'two_sided', got {tail!r}")
    return TestResult(
        statistic_name=Statistic.NCN.value,
        statistic_value=float(z),
        p_value=float(p),
        method=Method.NORMAL_HIGHDIM.value,
        replicates=0,
        seed=0,
    )
