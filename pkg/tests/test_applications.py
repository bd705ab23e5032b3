import numpy as np
import pytest
from scipy import stats

from distcov.applications import _lag_pairs, fit_least_squares, nonlinearity_test, serial_dcor
from distcov.core import corrected_dcor
from distcov.exceptions import DataError, ModelError
from distcov.inference import PermutationPlan
from distcov.metrics import euclidean_distances

from conftest import random_orthogonal


def binomial_band(trials, p=0.1, level=0.99):
    return stats.binom.ppf([(1 - level) / 2, (1 + level) / 2], trials, p)


class TestFit:
    def test_exact_line(self):
        fit = fit_least_squares([1, 2, 3], [2, 4, 6])
        np.testing.assert_allclose(fit.coefficients.ravel(), [0, 2], atol=1e-12)
        np.testing.assert_allclose(fit.residuals, 0, atol=1e-12)

    def test_constant_response(self):
        fit = fit_least_squares([1, 2, 3], [1, 1, 1])
        np.testing.assert_allclose(fit.coefficients.ravel(), [1, 0], atol=1e-12)

    def test_normal_equations_oracle(self, rng):
        n, p, q = 50, 3, 2
        X = rng.standard_normal((n, p))
        Y = X @ rng.standard_normal((p, q)) + 1.5 + rng.standard_normal((n, q))
        fit = fit_least_squares(X, Y)
        D = np.column_stack([np.ones(n), X])
        oracle = np.linalg.solve(D.T @ D, D.T @ Y)
        np.testing.assert_allclose(fit.coefficients, oracle, rtol=1e-8)
        np.testing.assert_allclose(fit.residuals + fit.fitted, Y, atol=1e-9)
        scale = np.abs(D).max(axis=0)
        inner = D.T @ fit.residuals
        assert np.all(np.abs(inner) <= 1e-7 * n * scale[:, None])

    def test_rank_deficient_names_columns(self, rng):
        x = rng.standard_normal(20)
        X = np.column_stack([x, 2 * x])
        with pytest.raises(ModelError, match="x0|x1"):
            fit_least_squares(X, rng.standard_normal(20))
        with pytest.raises(ModelError, match="intercept|x0"):
            fit_least_squares(np.full(20, 3.0), rng.standard_normal(20))

    def test_too_few_rows(self):
        with pytest.raises(ModelError):
            fit_least_squares([[1, 2], [3, 4], [5, 7]], [1, 2, 3])

    def test_affine_reparameterisation_leaves_residuals(self, rng):
        X = rng.standard_normal((40, 3))
        Y = np.sin(X[:, :1]) + rng.standard_normal((40, 1))
        M = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        r0 = fit_least_squares(X, Y).residuals
        r1 = fit_least_squares(X @ M + rng.normal(size=3), Y).residuals
        np.testing.assert_allclose(r1, r0, atol=1e-8)


class TestNonlinearity:
    def test_exact_linear_no_crash(self):
        x = np.linspace(0, 1, 30)
        res = nonlinearity_test(x, 3 * x + 1, PermutationPlan(99, 1))
        assert res.p_value == 1.0 and res.statistic_value == 0.0
        assert res.approximate

    def test_detects_quadratic(self, rng):
        x = rng.uniform(-1, 1, 100)
        assert nonlinearity_test(x, x**2, PermutationPlan(199, 5)).p_value <= 0.05

    def test_multivariate_response(self, rng):
        x = rng.uniform(-1, 1, (80, 2))
        y = np.column_stack([x[:, 0] ** 2, x[:, 1]]) + 0.05 * rng.standard_normal((80, 2))
        assert nonlinearity_test(x, y, PermutationPlan(199, 2)).p_value <= 0.05

    def test_similarity_transform_gives_same_p_value(self, rng):
        x = rng.standard_normal((60, 2))
        y = x[:, :1] * x[:, 1:] + rng.standard_normal((60, 1))
        plan = PermutationPlan(199, 17)
        moved = 2.5 * x @ random_orthogonal(rng, 2).T + np.array([4.0, -1.0])
        assert nonlinearity_test(x, y, plan).p_value == nonlinearity_test(moved, y, plan).p_value

    def test_small_size_check(self):
        rng = np.random.default_rng(8)
        trials = 200
        rej = 0
        for t in range(trials):
            x = rng.standard_normal(50)
            y = 2 * x + rng.standard_normal(50)
            rej += nonlinearity_test(x, y, PermutationPlan(99, t + 1)).p_value <= 0.1
        lo, hi = stats.binom.ppf([0.0005, 0.9995], trials, 0.1)
        assert lo <= rej <= hi

    def test_naive_procedure_is_conservative(self):
        rng = np.random.default_rng(9)
        trials = 100
        rej = 0
        for t in range(trials):
            x = rng.standard_normal(50)
            y = 2 * x + rng.standard_normal(50)
            rej += nonlinearity_test(x, y, PermutationPlan(99, t + 1), procedure="naive").p_value <= 0.1
        assert rej < 5

    def test_unknown_procedure(self, rng):
        x = rng.standard_normal(20)
        with pytest.raises(ValueError):
            nonlinearity_test(x, x + rng.standard_normal(20), procedure="bogus")

    def test_refit_thread_independent(self, rng):
        x = rng.standard_normal((40, 2))
        y = x.sum(axis=1) + rng.standard_normal(40)
        plan = PermutationPlan(101, 4)
        assert nonlinearity_test(x, y, plan, threads=1) == nonlinearity_test(x, y, plan, threads=3)


class TestSerial:
    def test_self_pairing(self, rng):
        z = rng.standard_normal((30, 2))
        x, y = _lag_pairs(z, 0)
        assert corrected_dcor(euclidean_distances(x), euclidean_distances(y)).cn == pytest.approx(1.0, abs=1e-12)

    def test_alternating(self):
        z = np.tile([1.0, -1.0], 20)
        res = serial_dcor(z, 1, PermutationPlan(99, 1))[0]
        assert res.dcor == pytest.approx(1.0, abs=1e-12)
        assert res.lag == 1 and res.effective_n == 39 and res.approximate

    def test_time_reversal(self, rng):
        z = np.cumsum(rng.standard_normal((60, 2)), axis=0)
        plan = PermutationPlan(49, 3)
        fwd = serial_dcor(z, 4, plan)
        rev = serial_dcor(z[::-1], 4, plan)
        for a, b in zip(fwd, rev):
            assert a.dcor == pytest.approx(b.dcor, rel=1e-12, abs=1e-14)

    def test_detects_ar1(self, rng):
        e = rng.standard_normal(300)
        z = np.empty(300)
        z[0] = e[0]
        for t in range(1, 300):
            z[t] = 0.6 * z[t - 1] + e[t]
        assert serial_dcor(z, 1, PermutationPlan(199, 4))[0].p_value <= 0.01

    def test_too_short(self):
        with pytest.raises(DataError):
            serial_dcor(np.arange(5.0), 3)
        with pytest.raises(DataError):
            serial_dcor(np.arange(5.0), 0)

    @pytest.mark.slow
    def test_null_rejection_rate(self):
        rng = np.random.default_rng(21)
        sims, max_lag = 500, 5
        rej = np.zeros(max_lag, dtype=int)
        for s in range(sims):
            z = rng.standard_normal(200)
            res = serial_dcor(z, max_lag, PermutationPlan(99, s + 1))
            rej += [r.p_value <= 0.1 for r in res]
        lo, hi = binomial_band(sims)
        assert np.all((lo <= rej) & (rej <= hi)), rej
