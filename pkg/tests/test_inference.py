import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from distcov.core import double_center, v_dcov2
from distcov.exceptions import DataError, DegenerateSampleError, DomainError
from distcov.inference import (
    PermutationPlan,
    Statistic,
    highdim_test,
    permutation_p_value,
    permutation_replicates,
    permutation_test,
    replicate_permutation,
    replicate_vn2,
)
from distcov.metrics import euclidean_distances

from oracles import all_permutations


def dm(x):
    return euclidean_distances(x)


def test_self_dependence_exhaustive_small_n(rng):
    x = rng.standard_normal(5)
    A = double_center(dm(x))
    perms = all_permutations(5)[1:]  # drop identity
    assert len(perms) == 119
    observed = v_dcov2(A, A)
    assert np.all(replicate_vn2(A, A, perms) < observed)


def test_self_dependence_p_value(rng):
    x = rng.standard_normal(10)
    d = dm(x)
    res = permutation_test(d, d, PermutationPlan(replicates=199, seed=11))
    assert res.p_value == pytest.approx(1 / 200)
    assert res.replicates == 199 and res.method == "permutation"


def _seed_with_identity_first(n):
    for seed in range(1, 1000):
        if np.array_equal(replicate_permutation(seed, 0, n), np.arange(n)):
            return seed
    raise AssertionError("no seed found")


def test_single_replicate_tie_gives_one(rng):
    seed = _seed_with_identity_first(3)
    x, y = rng.standard_normal(3), rng.standard_normal(3)
    res = permutation_test(dm(x), dm(y), PermutationPlan(replicates=1, seed=seed))
    assert res.p_value == 1.0


@pytest.mark.parametrize("statistic", list(Statistic))
def test_thread_count_independent(rng, statistic):
    x, y = rng.standard_normal((25, 2)), rng.standard_normal(25)
    plan = PermutationPlan(replicates=301, seed=99, statistic=statistic)
    one = permutation_test(dm(x), dm(y), plan, threads=1)
    four = permutation_test(dm(x), dm(y), plan, threads=4)
    assert one == four
    _, r1 = permutation_replicates(dm(x), dm(y), plan, threads=1)
    _, r4 = permutation_replicates(dm(x), dm(y), plan, threads=3)
    assert np.array_equal(r1, r4)


def test_replicate_streams_are_uniform():
    counts = {}
    for i in range(6000):
        key = tuple(replicate_permutation(5, i, 3))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    chi2 = stats.chisquare(list(counts.values()))
    assert chi2.pvalue > 1e-3


def test_permutation_reuse_equivalence(rng):
    for _ in range(50):
        n = int(rng.integers(3, 15))
        x, y = rng.standard_normal((n, 2)), rng.standard_normal((n, 3))
        perm = rng.permutation(n)
        A, B = double_center(dm(x)), double_center(dm(y))
        reused = v_dcov2(A, B.permuted(perm))
        rebuilt = v_dcov2(A, double_center(dm(y[perm])))
        assert reused == pytest.approx(rebuilt, rel=1e-10)


def test_label_invariance_exhaustive(rng):
    x, y = rng.standard_normal(5), rng.standard_normal(5)
    A, B = double_center(dm(x)), double_center(dm(y))
    perms = all_permutations(5)
    permute_y = np.sort(replicate_vn2(A, B, perms))
    permute_x = np.sort([v_dcov2(A.permuted(p), B) for p in perms])
    np.testing.assert_allclose(permute_x, permute_y, rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=30),
    st.floats(-10, 10, allow_nan=False),
    st.floats(0, 5, allow_nan=False),
)
def test_p_value_monotone(reps, observed, bump):
    p1 = permutation_p_value(observed, reps)
    p2 = permutation_p_value(observed + bump, reps)
    assert p2 <= p1
    assert 0 < p1 <= 1


def test_statistics_rank_equivalent(rng):
    # every statistic is an increasing function of permuted V_n^2
    x, y = rng.standard_normal(15), rng.standard_normal(15) + rng.standard_normal(15)
    ps = {s: permutation_test(dm(x), dm(y), PermutationPlan(199, 3, s)).p_value for s in Statistic}
    assert len(set(ps.values())) == 1


def test_errors(rng):
    with pytest.raises(DomainError):
        permutation_test(dm([0.0, 1.0]), dm([1.0, 0.0]))
    with pytest.raises(DegenerateSampleError):
        permutation_test(dm(np.zeros(5)), dm(rng.standard_normal(5)))
    with pytest.raises(DataError):
        PermutationPlan(replicates=0)
    with pytest.raises(DataError):
        PermutationPlan(seed=-1)


def test_degenerate_cn_statistic_is_allowed(rng):
    res = permutation_test(dm(np.zeros(5)), dm(rng.standard_normal(5)), PermutationPlan(99, 1, "Cn"))
    assert res.statistic_value == 0.0 and res.p_value == 1.0


def test_small_sample_size_check():
    rng = np.random.default_rng(5)
    rejections = 0
    trials = 300
    for t in range(trials):
        x, y = rng.standard_normal(20), rng.standard_normal(20)
        rejections += permutation_test(dm(x), dm(y), PermutationPlan(99, t + 1)).p_value <= 0.1
    lo, hi = stats.binom.ppf([0.0005, 0.9995], trials, 0.1)
    assert lo <= rejections <= hi


class TestHighdim:
    def test_zero(self):
        res = highdim_test(0.0, 10)
        assert res.p_value == 0.5 and res.replicates == 0 and res.method == "normal_highdim"

    def test_one_percent_quantile(self):
        z = math.sqrt(2) * stats.norm.ppf(0.99)
        assert z == pytest.approx(3.2899527, abs=1e-6)
        assert highdim_test(z / 20, 20).p_value == pytest.approx(0.01, abs=1e-6)

    def test_lower_tail(self):
        assert highdim_test(-5 / 10, 10).p_value > 0.99

    def test_two_sided(self):
        z = math.sqrt(2) * stats.norm.ppf(0.975)
        assert highdim_test(-z / 30, 30, tail="two_sided").p_value == pytest.approx(0.05, abs=1e-9)

    def test_requires_n3(self):
        with pytest.raises(DomainError):
            highdim_test(0.1, 2)

    def test_matches_scipy(self):
        for z in np.linspace(-6, 6, 25):
            assert highdim_test(z / 50, 50).p_value == pytest.approx(stats.norm.sf(z, scale=math.sqrt(2)), rel=1e-12, abs=1e-300)
