"""Interval constructors against hand ranks and brute-force refit oracles."""

import math

import numpy as np
import pytest

from relconf.core import ConformalMethod, DataError, Dataset, Regressor
from relconf.conformal import (
    ConformalSpec,
    ceil_guarded,
    conformal_interval,
    full_conformal,
    full_conformal_accepted,
    jackknife_conformal,
    jackknife_residuals,
    loo_quantile,
    split_conformal,
    split_quantile,
)
from relconf.regress import fit_kernel, fit_lasso, fit_ols, predict, predict_many


def make_dataset(rng, n, p, noise=1.0):
    x = rng.normal(size=(n, p))
    y = 1.0 + x @ rng.normal(size=p) + noise * rng.normal(size=n)
    return Dataset(x, y)


def brute_force_full_ols(d, x0, alpha, grid):
    """Independent full-conformal membership check: explicit normal-equations
    refit per candidate, rank rule restated from its definition."""
    n = d.n
    k = math.ceil((n + 1) * (1.0 - alpha) - 1e-9)
    x_aug = np.vstack([d.x, x0])
    a = np.column_stack([np.ones(n + 1), x_aug])
    out = []
    for t in grid:
        y_aug = np.append(d.y, t)
        beta = np.linalg.solve(a.T @ a, a.T @ y_aug)
        r = np.abs(y_aug - a @ beta)
        out.append(1 + int((r[:n] < r[n]).sum()) <= k)
    return np.array(out)


class TestQuantileRules:
    def test_split_hand_example(self):
        # 9 calibration residuals at alpha=0.1: k = ceil(10*0.9) = 9
        assert split_quantile(np.arange(1.0, 10.0), 0.1) == 9.0

    def test_loo_hand_example(self):
        # 10 residuals at alpha=0.2: k = ceil(8) = 8
        assert loo_quantile(np.arange(1.0, 11.0), 0.2) == 8.0

    def test_rank_clamps_to_sample_size(self):
        assert split_quantile(np.array([3.0, 1.0, 2.0]), 0.01) == 3.0

    def test_ceiling_guard_absorbs_float_dust(self):
        # 10 * 0.9 floats to 9.000000000000002; the guard keeps k = 9
        assert ceil_guarded(10 * 0.9) == 9
        assert ceil_guarded(9.0) == 9
        assert ceil_guarded(9.1) == 10


class TestSplit:
    SPEC = ConformalSpec(method="split", alpha=0.1)

    def test_perfect_fit_collapses(self):
        x = np.linspace(0, 1, 13)[:, None]
        d = Dataset(x, 2.0 * x.ravel())
        iv = split_conformal(d, "ols", [0.4], self.SPEC, seed=5)
        assert iv.lo == pytest.approx(iv.up, abs=1e-10)
        assert iv.point == pytest.approx(0.8, abs=1e-10)

    def test_interval_is_centered(self):
        d = make_dataset(np.random.default_rng(0), 40, 2)
        iv = split_conformal(d, "ols", [0.1, 0.2], self.SPEC, seed=1)
        assert iv.lo <= iv.point <= iv.up
        assert iv.up - iv.point == pytest.approx(iv.point - iv.lo)

    def test_monotone_in_alpha(self):
        d = make_dataset(np.random.default_rng(1), 60, 2)
        widths = []
        for alpha in (0.05, 0.1, 0.2, 0.5):
            spec = ConformalSpec(method="split", alpha=alpha)
            widths.append(split_conformal(d, "ols", [0.0, 0.0], spec, seed=7).length)
        assert all(a >= b for a, b in zip(widths, widths[1:]))

    def test_translation_equivariance_ols(self):
        d = make_dataset(np.random.default_rng(2), 50, 2)
        shifted = Dataset(d.x, d.y + 10.0)
        a = split_conformal(d, "ols", [0.3, -0.2], self.SPEC, seed=3)
        b = split_conformal(shifted, "ols", [0.3, -0.2], self.SPEC, seed=3)
        assert b.lo == pytest.approx(a.lo + 10.0, abs=1e-9)
        assert b.up == pytest.approx(a.up + 10.0, abs=1e-9)
        assert b.length == pytest.approx(a.length, abs=1e-9)

    def test_seed_determinism(self):
        d = make_dataset(np.random.default_rng(3), 30, 2)
        a = split_conformal(d, "ols", [0.0, 0.0], self.SPEC, seed=11)
        b = split_conformal(d, "ols", [0.0, 0.0], self.SPEC, seed=11)
        assert (a.lo, a.point, a.up) == (b.lo, b.point, b.up)

    def test_too_small_to_partition(self):
        d = make_dataset(np.random.default_rng(4), 3, 1)
        with pytest.raises(DataError, match="split"):
            split_conformal(d, "ols", [0.0], self.SPEC, seed=0)

    def test_all_engines_produce_finite_intervals(self):
        d = make_dataset(np.random.default_rng(5), 40, 2)
        for reg in ("ols", "lasso", "kernel"):
            iv = split_conformal(d, reg, [0.1, 0.1], self.SPEC, seed=2)
            assert np.isfinite([iv.lo, iv.point, iv.up]).all()
            assert iv.regressor is Regressor(reg)


class TestFull:
    def test_matches_brute_force_on_random_datasets(self):
        spec = ConformalSpec(method="full", alpha=0.1, grid_points=20)
        for trial in range(5):
            rng = np.random.default_rng(200 + trial)
            n = int(rng.integers(5, 16))
            p = int(rng.integers(1, 3))
            d = make_dataset(rng, n, p)
            x0 = rng.normal(size=p)
            grid, accepted, _ = full_conformal_accepted(d, "ols", x0, spec)
            oracle = brute_force_full_ols(d, x0, spec.alpha, grid)
            np.testing.assert_array_equal(accepted, oracle)

    def test_exact_linear_interval_contains_truth(self):
        # noiseless data makes any off-line candidate the unique worst
        # residual, so acceptance needs either a grid point exactly on the
        # line or alpha small enough that the rank threshold reaches n+1
        x = np.linspace(0.0, 2.0, 12)[:, None]
        d = Dataset(x, 2.0 * x.ravel())
        on_grid = ConformalSpec(method="full", alpha=0.2, grid_points=13)
        iv = full_conformal(d, "ols", [0.75], on_grid)  # grid step 0.5 hits 1.5
        assert not iv.degenerate
        assert iv.lo <= 1.5 <= iv.up
        tiny_alpha = ConformalSpec(method="full", alpha=0.05, grid_points=13)
        iv = full_conformal(d, "ols", [0.75], tiny_alpha)  # k = n+1: accept all
        assert (iv.lo, iv.up) == (-1.0, 5.0)

    def test_nested_in_alpha(self):
        d = make_dataset(np.random.default_rng(6), 20, 2)
        tight = full_conformal(d, "ols", [0.1, 0.1], ConformalSpec("full", alpha=0.5))
        wide = full_conformal(d, "ols", [0.1, 0.1], ConformalSpec("full", alpha=0.1))
        assert wide.lo <= tight.lo and tight.up <= wide.up

    def test_empty_acceptance_flags_degenerate(self):
        # two points on y=x and a query at their midpoint: the augmented
        # residual vector is proportional to (1,1,-2), so the trial rank
        # is 3 unless the candidate equals 0.5 exactly - which the
        # 20-point grid over [-0.25, 1.25] never hits
        d = Dataset(np.array([[0.0], [1.0]]), [0.0, 1.0])
        spec = ConformalSpec(method="full", alpha=0.9, grid_points=20)
        iv = full_conformal(d, "ols", [0.5], spec)
        assert iv.degenerate
        assert iv.lo == iv.up == iv.point == pytest.approx(0.5)

    def test_kernel_shortcut_matches_literal_refits(self):
        rng = np.random.default_rng(7)
        d = make_dataset(rng, 8, 2)
        x0 = rng.normal(size=2)
        spec = ConformalSpec(method="full", alpha=0.2, grid_points=15)
        grid, accepted, _ = full_conformal_accepted(d, "kernel", x0, spec)
        k = math.ceil((d.n + 1) * (1 - spec.alpha) - 1e-9)
        x_aug = np.vstack([d.x, x0])
        oracle = []
        for t in grid:
            y_aug = np.append(d.y, t)
            m = fit_kernel(Dataset(x_aug, y_aug))
            r = np.abs(y_aug - predict_many(m, x_aug))
            oracle.append(1 + int((r[: d.n] < r[d.n]).sum()) <= k)
        np.testing.assert_array_equal(accepted, np.array(oracle))

    def test_lasso_penalty_reused_from_base_fit(self):
        rng = np.random.default_rng(8)
        d = make_dataset(rng, 25, 3)
        spec = ConformalSpec(method="full", alpha=0.2, grid_points=12)
        base_lam = fit_lasso(d, seed=0).lam
        via_cv = full_conformal(d, "lasso", [0.0, 0.0, 0.0], spec, seed=0)
        via_fixed = full_conformal(d, "lasso", [0.0, 0.0, 0.0], spec, lam=base_lam)
        assert (via_cv.lo, via_cv.up) == (via_fixed.lo, via_fixed.up)


class TestJackknife:
    SPEC = ConformalSpec(method="jackknife", alpha=0.1)

    def test_press_matches_naive_refits(self):
        for trial in range(5):
            rng = np.random.default_rng(300 + trial)
            n = int(rng.integers(8, 31))
            d = make_dataset(rng, n, 2)
            loo = jackknife_residuals(d, "ols")
            naive = np.empty(n)
            for i in range(n):
                rest = np.delete(np.arange(n), i)
                m = fit_ols(d.subset(rest))
                naive[i] = d.y[i] - predict(m, d.x[i])
            np.testing.assert_allclose(loo, naive, atol=1e-8)

    def test_exact_linear_collapses(self):
        x = np.linspace(0, 1, 10)[:, None]
        d = Dataset(x, 3.0 * x.ravel() + 1.0)
        iv = jackknife_conformal(d, "ols", [0.5], self.SPEC)
        assert iv.length == pytest.approx(0.0, abs=1e-8)
        assert iv.point == pytest.approx(2.5, abs=1e-8)

    def test_lasso_loo_equals_per_row_refits(self):
        rng = np.random.default_rng(9)
        d = make_dataset(rng, 15, 3)
        lam = 0.08
        loo = jackknife_residuals(d, "lasso", lam=lam)
        for i in (0, 7, 14):
            rest = np.delete(np.arange(d.n), i)
            m = fit_lasso(d.subset(rest), lam=lam)
            assert loo[i] == pytest.approx(d.y[i] - predict(m, d.x[i]), abs=1e-12)

    def test_kernel_loo_against_explicit_loop(self):
        rng = np.random.default_rng(10)
        d = make_dataset(rng, 12, 2)
        km = fit_kernel(d)
        loo = jackknife_residuals(d, "kernel", bandwidth=km.bandwidth)
        z = km.train_z
        for i in range(d.n):
            d2 = ((z[i] - z) ** 2).sum(axis=1)
            w = np.exp(-d2 / (2 * km.bandwidth**2))
            w[i] = 0.0
            expected = d.y[i] - w @ d.y / w.sum()
            assert loo[i] == pytest.approx(expected, rel=1e-9)

    def test_rank_deficient_design_falls_back(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(6, 2))
        x = np.column_stack([x, x[:, 0] + x[:, 1]])  # exactly collinear
        d = Dataset(x, rng.normal(size=6))
        loo = jackknife_residuals(d, "ols")
        assert np.all(np.isfinite(loo))
        for i in (0, 3):
            rest = np.delete(np.arange(6), i)
            m = fit_ols(d.subset(rest))
            assert loo[i] == pytest.approx(d.y[i] - predict(m, d.x[i]), abs=1e-8)

    def test_monotone_in_alpha(self):
        d = make_dataset(np.random.default_rng(12), 30, 2)
        widths = [
            jackknife_conformal(
                d, "ols", [0.0, 0.0], ConformalSpec("jackknife", alpha=a)
            ).length
            for a in (0.05, 0.1, 0.2, 0.5)
        ]
        assert all(a >= b for a, b in zip(widths, widths[1:]))

    def test_needs_three_rows(self):
        d = Dataset([[0.0], [1.0]], [0.0, 1.0])
        with pytest.raises(DataError, match="jackknife"):
            jackknife_conformal(d, "ols", [0.5], self.SPEC)


class TestDispatch:
    def test_routes_by_method_and_tags_provenance(self):
        d = make_dataset(np.random.default_rng(13), 30, 2)
        for method in ("split", "full", "jackknife"):
            spec = ConformalSpec(method=method, alpha=0.2, grid_points=25)
            iv = conformal_interval(d, "ols", [0.0, 0.0], spec, seed=4)
            assert iv.conformal_method is ConformalMethod(method)
            assert iv.lo <= iv.up
