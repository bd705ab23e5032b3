"""
Monte Carlo checks of the estimators' known behaviour.

* the expectation of ``V_n^2`` under independence, and unbiasedness of ``U_n``;
* distance correlation of ``(sin kU, sin mU)``, ``U ~ Uniform(0, 2 pi)``;
* the Cauchy(0, 1/2) limit of ``S_n = sin U + sin 2U + ... + sin nU``;
* the Normal(0, 2) null of ``n C_n`` for high-dimensional independent data.

Replicates are drawn in fixed-size blocks; block ``b`` uses the stream
``Philox(key=(seed, b))``. Results therefore depend only on the parameters
and the seed, never on the thread count.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np
from scipy import stats

from .core import batch_estimates
from .exceptions import DataError
from .metrics import resolve_threads

BLOCK_REPS = 500

Sampler = Callable[[np.random.Generator, int, int], tuple[np.ndarray, np.ndarray]]


def block_rng(seed: int, block: int) -> np.random.Generator:
    key = np.array([seed, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _bernoulli_pair(rng, reps, n):
    return (
        rng.integers(0, 2, size=(reps, n, 1)).astype(float),
        rng.integers(0, 2, size=(reps, n, 1)).astype(float),
    )


def _normal_pair(rng, reps, n):
    return rng.standard_normal((reps, n, 1)), rng.standard_normal((reps, n, 1))


@dataclass(frozen=True)
class OracleSpec:
    """A data generator with (when known) its population parameters.

    ``mu1 = E|X - X'|``, ``mu2 = E|Y - Y'|`` and ``v2_true`` is the
    population squared distance covariance.
    """

    generator: str
    sampler: Sampler = field(repr=False, compare=False)
    mu1: float | None = None
    mu2: float | None = None
    v2_true: float | None = None

    def __post_init__(self):
        for name in ("mu1", "mu2"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise DataError(f"{name} must be nonnegative, got {val}")

    @classmethod
    def bernoulli_half_pair(cls) -> "OracleSpec":
        return cls("bernoulli_half_pair", _bernoulli_pair, mu1=0.5, mu2=0.5, v2_true=0.0)

    @classmethod
    def std_normal_pair(cls) -> "OracleSpec":
        mu = 2.0 / math.sqrt(math.pi)
        return cls("std_normal_pair", _normal_pair, mu1=mu, mu2=mu, v2_true=0.0)

    @classmethod
    def trig_pair(cls, k: int, m: int, reflect: bool = False) -> "OracleSpec":
        if k == m:
            raise DataError(f"trigonometric pair needs distinct frequencies, got k = m = {k}")
        if k < 1 or m < 1:
            raise DataError("frequencies must be positive integers")

        def sampler(rng, reps, n):
            u = rng.uniform(0.0, 2.0 * math.pi, size=(reps, n))
            if reflect:
                u = 2.0 * math.pi - u
            return np.sin(k * u)[..., np.newaxis], np.sin(m * u)[..., np.newaxis]

        return cls(f"trig_pair({k},{m})", sampler)

    @classmethod
    def custom(cls, sampler: Sampler, mu1=None, mu2=None, v2_true=None) -> "OracleSpec":
        return cls("custom", sampler, mu1=mu1, mu2=mu2, v2_true=v2_true)


@dataclass(frozen=True)
class SimReport:
    """Monte Carlo estimate with its standard error and target."""

    estimate: float
    std_error: float
    replicates: int
    target: float | None = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.std_error < 0:
            raise DataError("std_error must be nonnegative")
        if self.replicates < 2:
            raise DataError("a SimReport needs at least 2 replicates")

    @property
    def z_score(self) -> float | None:
        if self.target is None:
            return None
        diff = self.estimate - self.target
        if self.std_error == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.std_error

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "replicates": self.replicates,
            "target": self.target,
            "z_score": self.z_score,
            "params": self.params,
        }


def write_jsonl(reports: Iterable[SimReport], fh: TextIO) -> None:
    for rep in reports:
        fh.write(json.dumps(rep.to_dict(), allow_nan=False) + "\n")


def stack_distances(z: np.ndarray) -> np.ndarray:
    """Euclidean distance matrices for a stack of samples ``(reps, n, p)``."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 2:
        z = z[..., np.newaxis]
    if z.shape[-1] == 1:
        v = z[..., 0]
        return np.abs(v[:, :, np.newaxis] - v[:, np.newaxis, :])
    diff = z[:, :, np.newaxis, :] - z[:, np.newaxis, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _blocks(reps: int, block: int = BLOCK_REPS) -> list[tuple[int, int]]:
    return [(b, min(block, reps - b * block)) for b in range(-(-reps // block))]


def _run_blocks(fn, reps: int, seed: int, threads: int | None, block: int = BLOCK_REPS) -> np.ndarray:
    """Apply ``fn(rng, size)`` to each block and concatenate in block order."""
    jobs = _blocks(reps, block)
    run = lambda job: np.asarray(fn(block_rng(seed, job[0]), job[1]))
    threads = resolve_threads(threads)
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return np.concatenate(parts, axis=0)


def _estimates_sampler(spec: OracleSpec, n: int, keys: Sequence[str], chunk: int):
    def fn(rng, size):
        x, y = spec.sampler(rng, size, n)
        out = np.empty((size, len(keys)))
        for lo in range(0, size, chunk):
            hi = min(lo + chunk, size)
            est = batch_estimates(stack_distances(x[lo:hi]), stack_distances(y[lo:hi]))
            out[lo:hi] = np.column_stack([est[k] for k in keys])
        return out

    return fn


def _chunk_for(n: int) -> int:
    return max(1, (1 << 21) // (n * n))


def _mean_report(values: np.ndarray, target, name, params) -> SimReport:
    return SimReport(
        estimate=float(values.mean()),
        std_error=float(values.std(ddof=1) / math.sqrt(values.size)),
        replicates=int(values.size),
        target=target,
        name=name,
        params=params,
    )


def vn2_expectation_target(n: int, mu1: float, mu2: float, v2: float = 0.0) -> float:
    """``E[V_n^2] = (n - 1)/n^2 * ((n - 2) V^2 + mu1 mu2)``."""
    return (n - 1) / n**2 * ((n - 2) * v2 + mu1 * mu2)


def _require_known(spec: OracleSpec) -> None:
    if spec.mu1 is None or spec.mu2 is None or spec.v2_true is None:
        raise DataError(f"generator {spec.generator!r} has unknown population parameters")


def mc_vn2_expectation(spec: OracleSpec, n: int, reps: int, seed: int, threads: int | None = None) -> SimReport:
    """Monte Carlo mean of ``V_n^2`` against its closed-form expectation."""
    _require_known(spec)
    if reps < 1000:
        raise DataError(f"reps must be >= 1000, got {reps}")
    if n < 1:
        raise DataError("n must be >= 1")
    vals = _run_blocks(_estimates_sampler(spec, n, ["vn2"], _chunk_for(n)), reps, seed, threads)[:, 0]
    target = vn2_expectation_target(n, spec.mu1, spec.mu2, spec.v2_true)
    return _mean_report(vals, target, "vn2_expectation", {"generator": spec.generator, "n": n, "seed": seed})


def mc_un_expectation(spec: OracleSpec, n: int, reps: int, seed: int, threads: int | None = None) -> SimReport:
    """Monte Carlo mean of ``U_n(X, Y)``; the target is the population ``V^2``."""
    _require_known(spec)
    if reps < 1000:
        raise DataError(f"reps must be >= 1000, got {reps}")
    if n < 3:
        raise DataError(f"U_n needs n >= 3, got {n}")
    vals = _run_blocks(_estimates_sampler(spec, n, ["un_xy"], _chunk_for(n)), reps, seed, threads)[:, 0]
    return _mean_report(vals, spec.v2_true, "un_expectation", {"generator": spec.generator, "n": n, "seed": seed})


def trig_dcor_sweep(
    k: int,
    m_values: Sequence[int],
    n: int,
    reps: int,
    seed: int,
    reflect: bool = False,
    threads: int | None = None,
) -> list[SimReport]:
    """Mean distance correlation of ``(sin kU, sin mU)`` for each ``m``.

    ``estimate`` is the mean of ``sqrt(R_n^2)``. ``params`` also carries the
    mean of the corrected correlation (``cn_mean``) and of its square root
    clipped at zero (``sqrt_cn_mean``). All ``m`` share the same draws of U.
    """
    m_values = list(m_values)
    if any(m == k for m in m_values):
        raise DataError(f"m = k = {k} is the degenerate identical-frequency case")
    if n < 100 or reps < 100:
        raise DataError(f"need n >= 100 and reps >= 100, got n={n}, reps={reps}")
    reports = []
    for m in m_values:
        spec = OracleSpec.trig_pair(k, m, reflect=reflect)
        vals = _run_blocks(
            _estimates_sampler(spec, n, ["rn2", "cn"], _chunk_for(n)), reps, seed, threads, block=50
        )
        dcor = np.sqrt(np.maximum(vals[:, 0], 0.0))
        cn = vals[:, 1]
        sqrt_cn = np.sqrt(np.maximum(cn, 0.0))
        params = {
            "k": k,
            "m": m,
            "n": n,
            "seed": seed,
            "reflect": reflect,
            "cn_mean": float(cn.mean()),
            "cn_std_error": float(cn.std(ddof=1) / math.sqrt(cn.size)),
            "sqrt_cn_mean": float(sqrt_cn.mean()),
        }
        reports.append(_mean_report(dcor, None, "trig_dcor", params))
    return reports


def sn_samples(n: int, reps: int, seed: int, threads: int | None = None) -> np.ndarray:
    """Draws of ``S_n = sum_{j=1..n} sin(j U)`` by direct summation."""
    if n < 1:
        raise DataError("n must be >= 1")
    j = np.arange(1, n + 1, dtype=float)

    def fn(rng, size):
        u = rng.uniform(0.0, 2.0 * math.pi, size=size)
        out = np.empty(size)
        step = max(1, (1 << 20) // n)
        for lo in range(0, size, step):
            out[lo:lo + step] = np.sin(np.outer(u[lo:lo + step], j)).sum(axis=1)
        return out

    return _run_blocks(fn, reps, seed, threads, block=10_000)


def sn_cauchy_check(n: int, reps: int, seed: int, threads: int | None = None) -> float:
    """Kolmogorov-Smirnov distance between ``S_n`` draws and Cauchy(0, 1/2)."""
    if reps < 1000:
        raise DataError(f"reps must be >= 1000, got {reps}")
    s = sn_samples(n, reps, seed, threads)
    return float(stats.kstest(s, stats.cauchy(loc=0.0, scale=0.5).cdf).statistic)


def highdim_null_sample(p: int, q: int, n: int, reps: int, seed: int, threads: int | None = None) -> np.ndarray:
    """``n C_n`` for independent standard normal samples in dimensions p and q."""
    if n < 3:
        raise DataError(f"C_n needs n >= 3, got {n}")

    def sampler(rng, size, n_):
        return rng.standard_normal((size, n_, p)), rng.standard_normal((size, n_, q))

    spec = OracleSpec.custom(sampler)
    chunk = max(1, (1 << 22) // (n * n * max(p, q)))
    vals = _run_blocks(_estimates_sampler(spec, n, ["cn"], chunk), reps, seed, threads, block=100)
    return n * vals[:, 0]


def highdim_null_distribution(p: int, q: int, n: int, reps: int, seed: int, threads: int | None = None) -> float:
    """KS distance of ``n C_n`` under independence against Normal(0, variance 2)."""
    z = highdim_null_sample(p, q, n, reps, seed, threads)
    return float(stats.kstest(z, stats.norm(loc=0.0, scale=math.sqrt(2.0)).cdf).statistic)
