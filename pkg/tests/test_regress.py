"""Regression engines against closed-form and brute-force oracles."""

import numpy as np
import pytest

from relconf.core import DataError, Dataset, Regressor
from relconf.regress import (
    FittedModel,
    fit,
    fit_kernel,
    fit_lasso,
    fit_ols,
    lasso_kkt_residual,
    lasso_objective,
    predict,
    predict_many,
)
from relconf.regress import _cd_sweeps, _internal_scale


def make_dataset(rng, n, p, noise=1.0):
    x = rng.normal(size=(n, p))
    coef = rng.normal(size=p)
    y = 1.0 + x @ coef + noise * rng.normal(size=n)
    return Dataset(x, y)


def orthonormal_design(rng, n, p):
    """Zero-mean columns with (1/n) X'X = I exactly (up to float error)."""
    a = rng.normal(size=(n, p))
    a -= a.mean(axis=0)
    q, _ = np.linalg.qr(a)
    return q * np.sqrt(n)


class TestOls:
    def test_exact_linear_data(self):
        d = Dataset(np.array([[1.0], [2.0], [3.0]]), [2.0, 4.0, 6.0])
        m = fit_ols(d)
        np.testing.assert_allclose(m.intercept, 0.0, atol=1e-10)
        np.testing.assert_allclose(m.coefficients, [2.0], atol=1e-10)

    def test_constant_response(self):
        rng = np.random.default_rng(0)
        d = Dataset(rng.normal(size=(12, 3)), np.full(12, 4.5))
        m = fit_ols(d)
        np.testing.assert_allclose(m.intercept, 4.5, atol=1e-10)
        np.testing.assert_allclose(m.coefficients, np.zeros(3), atol=1e-10)

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(1)
        d = make_dataset(rng, 20, 3)
        m = fit_ols(d)
        a = np.column_stack([np.ones(20), d.x])
        oracle = np.linalg.solve(a.T @ a, a.T @ d.y)
        np.testing.assert_allclose(m.intercept, oracle[0], atol=1e-8)
        np.testing.assert_allclose(m.coefficients, oracle[1:], atol=1e-8)

    def test_residuals_orthogonal_to_design(self):
        rng = np.random.default_rng(2)
        d = make_dataset(rng, 50, 4)
        m = fit_ols(d)
        r = d.y - predict_many(m, d.x)
        assert abs(r.sum()) <= 1e-8 * d.n
        for j in range(d.p):
            assert abs(r @ d.x[:, j]) <= 1e-8 * d.n

    def test_singular_design_minimum_norm(self):
        rng = np.random.default_rng(3)
        d = make_dataset(rng, 4, 7)  # p > n
        m = fit_ols(d)
        a = np.column_stack([np.ones(4), d.x])
        oracle = np.linalg.pinv(a) @ d.y
        np.testing.assert_allclose(
            np.concatenate([[m.intercept], m.coefficients]), oracle, atol=1e-8
        )
        np.testing.assert_allclose(predict_many(m, d.x), d.y, atol=1e-8)


class TestLasso:
    def test_zero_penalty_equals_ols(self):
        rng = np.random.default_rng(4)
        d = make_dataset(rng, 40, 4)
        m = fit_lasso(d, lam=0.0)
        ols = fit_ols(d)
        np.testing.assert_allclose(m.intercept, ols.intercept, atol=1e-6)
        np.testing.assert_allclose(m.coefficients, ols.coefficients, atol=1e-6)

    def test_orthonormal_soft_threshold_oracle(self):
        rng = np.random.default_rng(5)
        x = orthonormal_design(rng, 60, 5)
        y = 2.0 + x @ np.array([1.5, -0.8, 0.3, 0.0, 0.05]) + rng.normal(size=60)
        d = Dataset(x, y)
        ols_coef = fit_ols(d).coefficients
        for lam in (0.05, 0.2, 0.7):
            m = fit_lasso(d, lam=lam)
            expected = np.sign(ols_coef) * np.maximum(np.abs(ols_coef) - lam, 0.0)
            np.testing.assert_allclose(m.coefficients, expected, atol=1e-6)

    def test_large_penalty_zeroes_everything(self):
        rng = np.random.default_rng(6)
        d = make_dataset(rng, 30, 4)
        m = fit_lasso(d, lam=1e6)
        np.testing.assert_array_equal(m.coefficients, np.zeros(4))
        np.testing.assert_allclose(m.intercept, d.y.mean(), atol=1e-10)

    def test_kkt_conditions_at_cv_solution(self):
        rng = np.random.default_rng(7)
        for trial in range(5):
            d = make_dataset(np.random.default_rng(100 + trial), 50, 8)
            m = fit_lasso(d, folds=5, seed=trial)
            assert lasso_kkt_residual(d, m) <= 1e-6

    def test_objective_non_increasing_across_sweeps(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(40, 6))
        y = x @ rng.normal(size=6) + rng.normal(size=40)
        xs, _, _ = _internal_scale(x)
        yc = y - y.mean()
        trace = []
        _cd_sweeps(xs, yc, 0.1, np.zeros(6), np.ones(6, dtype=bool), trace)
        assert len(trace) >= 1
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))

    def test_cv_is_seed_deterministic(self):
        d = make_dataset(np.random.default_rng(9), 40, 5)
        m1 = fit_lasso(d, seed=3)
        m2 = fit_lasso(d, seed=3)
        assert m1.lam == m2.lam
        np.testing.assert_array_equal(m1.coefficients, m2.coefficients)

    def test_sparse_recovery_monte_carlo(self):
        # 12 features, 2 active: the cross-validated fit should zero out
        # at least 5 of the 10 null coefficients in >= 80% of replications.
        hits = 0
        reps = 100
        for rep in range(reps):
            rng = np.random.default_rng(1000 + rep)
            x = rng.normal(size=(100, 12))
            beta = np.concatenate([rng.normal(size=2), np.zeros(10)])
            y = x @ beta + rng.normal(size=100)
            m = fit_lasso(Dataset(x, y), folds=5, seed=rep)
            if np.sum(m.coefficients[2:] == 0.0) >= 5:
                hits += 1
        assert hits >= 80

    def test_too_few_rows_for_folds(self):
        d = make_dataset(np.random.default_rng(10), 4, 2)
        with pytest.raises(DataError):
            fit_lasso(d, folds=5)

    def test_objective_helper_matches_definition(self):
        rng = np.random.default_rng(11)
        d = make_dataset(rng, 15, 3)
        coef = rng.normal(size=3)
        r = d.y - 0.7 - d.x @ coef
        expected = (r @ r) / 30 + 0.3 * np.abs(coef).sum()
        assert lasso_objective(d.x, d.y, 0.7, coef, 0.3) == pytest.approx(expected)


class TestKernel:
    def test_constant_response(self):
        rng = np.random.default_rng(12)
        d = Dataset(rng.normal(size=(15, 2)), np.full(15, 3.25))
        m = fit_kernel(d)
        assert predict(m, rng.normal(size=2)) == pytest.approx(3.25)

    def test_interpolation_limit_at_training_tail(self):
        rng = np.random.default_rng(13)
        d = make_dataset(rng, 12, 2)
        m = fit_kernel(d, bandwidth=1e-6)
        for i in (0, 5, 11):
            assert predict(m, d.x[i]) == pytest.approx(d.y[i], abs=1e-6)

    def test_midpoint_symmetry(self):
        d = Dataset(np.array([[0.0], [2.0]]), [0.0, 2.0])
        m = fit_kernel(d)
        assert predict(m, [1.0]) == pytest.approx(1.0)

    def test_direct_formula_oracle_1d(self):
        rng = np.random.default_rng(14)
        x = rng.normal(size=(10, 1))
        y = rng.normal(size=10)
        d = Dataset(x, y)
        m = fit_kernel(d)
        # independent recomputation: standardize, median-distance bandwidth,
        # plain (unstabilized) weighted average
        z = (x - x.mean()) / x.std(ddof=1)
        dists = [abs(z[i, 0] - z[j, 0]) for i in range(10) for j in range(i + 1, 10)]
        h = np.median(dists)
        assert m.bandwidth == pytest.approx(h, rel=1e-12)
        for x0 in (-0.5, 0.3, 1.7):
            z0 = (x0 - x.mean()) / x.std(ddof=1)
            k = np.exp(-((z0 - z[:, 0]) ** 2) / (2 * h**2))
            np.testing.assert_allclose(predict(m, [x0]), k @ y / k.sum(), rtol=1e-10)

    def test_predictions_are_convex_combinations(self):
        rng = np.random.default_rng(15)
        d = make_dataset(rng, 30, 3)
        m = fit_kernel(d)
        preds = predict_many(m, rng.normal(size=(50, 3)))
        assert preds.min() >= d.y.min() - 1e-12
        assert preds.max() <= d.y.max() + 1e-12

    def test_duplicate_rows_floor_bandwidth(self):
        x = np.repeat([[1.0, 2.0]], 6, axis=0)
        x[3:] += 1.0
        m = fit_kernel(Dataset(x, np.arange(6.0)))
        assert m.bandwidth >= 1e-6
        assert np.isfinite(predict(m, [1.0, 2.0]))


class TestPredict:
    def test_linear_evaluation(self):
        m = FittedModel(
            kind=Regressor.OLS, intercept=1.0, coefficients=np.array([2.0, 3.0])
        )
        assert predict(m, [1.0, 1.0]) == pytest.approx(6.0)

    def test_lasso_prediction_is_affine(self):
        rng = np.random.default_rng(16)
        d = make_dataset(rng, 25, 3)
        m = fit_lasso(d, lam=0.1)
        x0 = rng.normal(size=3)
        assert predict(m, x0) == pytest.approx(m.intercept + m.coefficients @ x0)

    def test_dimension_mismatch(self):
        m = FittedModel(kind=Regressor.OLS, intercept=0.0, coefficients=np.ones(2))
        with pytest.raises(DataError, match="features"):
            predict(m, [1.0, 2.0, 3.0])

    def test_dispatcher_covers_all_engines(self):
        rng = np.random.default_rng(17)
        d = make_dataset(rng, 30, 2)
        for kind in ("ols", "lasso", "kernel"):
            m = fit(d, kind, seed=1)
            assert m.kind is Regressor(kind)
            assert np.all(np.isfinite(predict_many(m, d.x)))
