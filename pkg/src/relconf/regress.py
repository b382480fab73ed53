"""Regression engines: ordinary least squares, LASSO, and kernel smoothing.

Each engine exposes the same surface: a ``fit_*`` constructor returning an
immutable :class:`FittedModel`, plus :func:`predict` / :func:`predict_many`
for evaluation at new tails. ``fit`` dispatches on the engine enum so
interval constructors stay engine-agnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DataError, Dataset, Regressor, standardize, transform_features

__all__ = [
    "FittedModel",
    "fit",
    "fit_ols",
    "fit_lasso",
    "fit_kernel",
    "predict",
    "predict_many",
    "kernel_weights",
    "lasso_kkt_residual",
    "lasso_objective",
    "soft_threshold",
]

# LASSO path constants: 50-point log grid down to 1e-4 of the smallest
# all-zero lambda, coordinate sweeps stop at max coefficient change 1e-8.
LASSO_GRID_SIZE = 50
LASSO_GRID_RATIO = 1e-4
LASSO_TOL = 1e-8
LASSO_MAX_SWEEPS = 10_000
KERNEL_MIN_BANDWIDTH = 1e-6


@dataclass(frozen=True)
class FittedModel:
    """Frozen result of one regression fit.

    ``coefficients``/``intercept`` describe linear engines; the kernel
    engine instead retains its standardized training tails, heads, the
    standardization parameters, and the bandwidth.
    """

    kind: Regressor
    intercept: float = 0.0
    coefficients: np.ndarray | None = None
    lam: float | None = None
    bandwidth: float | None = None
    train_z: np.ndarray | None = None
    train_y: np.ndarray | None = None
    centers: np.ndarray | None = None
    scales: np.ndarray | None = None

    @property
    def p(self) -> int:
        if self.coefficients is not None:
            return self.coefficients.shape[0]
        return self.train_z.shape[1]


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# Ordinary least squares
# ---------------------------------------------------------------------------

def fit_ols(d: Dataset) -> FittedModel:
    """Least-squares fit with intercept.

    Singular designs (including p >= n) resolve to the minimum-norm
    solution, so downstream interval constructors never abort on small
    relevance-selected subsets.
    """
    a = np.column_stack([np.ones(d.n), d.x])
    coef, *_ = np.linalg.lstsq(a, d.y, rcond=None)
    return FittedModel(
        kind=Regressor.OLS, intercept=float(coef[0]), coefficients=_frozen(coef[1:])
    )


# ---------------------------------------------------------------------------
# LASSO via cyclic coordinate descent
# ---------------------------------------------------------------------------

def soft_threshold(z: float, lam: float) -> float:
    """Proximal map of lam*|.|: shrink z toward zero by lam, clipping at 0."""
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def _internal_scale(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center columns and scale by the root mean square deviation.

    The 1/n denominator makes every active standardized column satisfy
    (1/n)||col||^2 = 1, which reduces each coordinate update to a pure
    soft-threshold step. Constant columns get scale 1 and stay inactive.
    """
    m = x.mean(axis=0)
    s = np.sqrt(((x - m) ** 2).mean(axis=0))
    active = s > 0.0
    s = np.where(active, s, 1.0)
    return (x - m) / s, m, s


def lasso_objective(x, y, intercept: float, coef, lam: float) -> float:
    """(1/2n) sum of squared residuals plus lam times the l1 norm of coef."""
    r = y - intercept - x @ np.asarray(coef)
    return float((r @ r) / (2 * len(y)) + lam * np.abs(coef).sum())


def _cd_sweeps(xs, yc, lam, beta, active, trace: list | None = None):
    """Cyclic coordinate descent at a fixed penalty; mutates and returns beta.

    ``trace``, if given, collects the objective value after every sweep.
    """
    n = xs.shape[0]
    r = yc - xs @ beta
    for _ in range(LASSO_MAX_SWEEPS):
        delta = 0.0
        for j in np.flatnonzero(active):
            old = beta[j]
            zj = xs[:, j] @ r / n + old
            new = soft_threshold(zj, lam)
            if new != old:
                r += xs[:, j] * (old - new)
                beta[j] = new
                change = abs(new - old)
                if change > delta:
                    delta = change
        if trace is not None:
            trace.append(float((r @ r) / (2 * n) + lam * np.abs(beta).sum()))
        if delta < LASSO_TOL:
            break
    return beta


def _lambda_grid(xs, yc) -> np.ndarray:
    n = xs.shape[0]
    lam_max = float(np.max(np.abs(xs.T @ yc)) / n) if xs.size else 0.0
    if lam_max <= 0.0:
        lam_max = 1e-3  # constant response: any penalty zeroes everything
    return np.geomspace(lam_max, lam_max * LASSO_GRID_RATIO, LASSO_GRID_SIZE)


def _lasso_solve(x, y, lam, trace=None) -> tuple[float, np.ndarray]:
    """One penalized fit; returns (intercept, coefficients) on the input scale."""
    xs, m, s = _internal_scale(x)
    active = np.any(xs != 0.0, axis=0)
    ybar = y.mean()
    yc = y - ybar
    beta = _cd_sweeps(xs, yc, lam, np.zeros(x.shape[1]), active, trace)
    coef = beta / s
    return float(ybar - coef @ m), coef


def _cv_lambda(x, y, folds: int, seed: int) -> float:
    """Pick the penalty by K-fold cross-validation on mean squared error.

    The grid comes from the full data; each fold fits the whole path with
    warm starts. Ties resolve to the largest (most parsimonious) penalty.
    """
    n = x.shape[0]
    grid = _lambda_grid(_internal_scale(x)[0], y - y.mean())
    rng = np.random.default_rng(seed)
    fold_ids = np.array_split(rng.permutation(n), folds)
    sse = np.zeros(grid.size)
    for held in fold_ids:
        mask = np.ones(n, dtype=bool)
        mask[held] = False
        xt, yt = x[mask], y[mask]
        xs, m, s = _internal_scale(xt)
        active = np.any(xs != 0.0, axis=0)
        ybar = yt.mean()
        yc = yt - ybar
        beta = np.zeros(x.shape[1])
        for g, lam in enumerate(grid):
            beta = _cd_sweeps(xs, yc, lam, beta, active)
            coef = beta / s
            pred = (ybar - coef @ m) + x[held] @ coef
            sse[g] += float(((y[held] - pred) ** 2).sum())
    best = float(grid[np.argmin(sse)])  # argmin takes the first = largest lam
    return best


def fit_lasso(
    d: Dataset, folds: int = 5, lam: float | None = None, seed: int = 0
) -> FittedModel:
    """L1-penalized least squares, objective (1/2n)||y - b0 - X b||^2 + lam*||b||_1.

    Coordinate descent runs on internally rescaled features; reported
    coefficients are on the original scale. When ``lam`` is None it is
    chosen by ``folds``-fold cross-validation with fold assignment drawn
    from ``seed``.
    """
    if lam is None:
        folds = int(folds)
        if not (2 <= folds <= d.n):
            raise DataError(f"need n >= folds >= 2, got n={d.n}, folds={folds}")
        lam = _cv_lambda(d.x, d.y, folds, seed)
    lam = float(lam)
    if lam < 0.0:
        raise DataError(f"penalty must be >= 0, got {lam}")
    intercept, coef = _lasso_solve(d.x, d.y, lam)
    return FittedModel(
        kind=Regressor.LASSO, intercept=intercept, coefficients=_frozen(coef), lam=lam
    )


def lasso_kkt_residual(d: Dataset, m: FittedModel) -> float:
    """Largest violation of the LASSO stationarity conditions at ``m``.

    Measured on the internal (rescaled) problem the solver optimizes:
    active coordinates need gradient = lam * sign, inactive ones need
    |gradient| <= lam. Zero means exact optimality.
    """
    xs, centers, scales = _internal_scale(d.x)
    active_cols = np.any(xs != 0.0, axis=0)
    beta = m.coefficients * scales
    r = (d.y - d.y.mean()) - xs @ beta
    grad = xs.T @ r / d.n
    worst = 0.0
    for j in range(xs.shape[1]):
        if not active_cols[j]:
            continue
        if beta[j] != 0.0:
            worst = max(worst, abs(grad[j] - m.lam * math.copysign(1.0, beta[j])))
        else:
            worst = max(worst, max(0.0, abs(grad[j]) - m.lam))
    return worst


# ---------------------------------------------------------------------------
# Kernel smoothing (Nadaraya-Watson, Gaussian kernel)
# ---------------------------------------------------------------------------

def _median_pairwise_distance(z: np.ndarray) -> float:
    d2 = ((z[:, None, :] - z[None, :, :]) ** 2).sum(axis=-1)
    iu = np.triu_indices(z.shape[0], k=1)
    return float(np.sqrt(np.median(d2[iu])))


def fit_kernel(d: Dataset, bandwidth: float | None = None) -> FittedModel:
    """Gaussian-kernel local averaging on standardized features.

    The default bandwidth is the median pairwise distance among the
    standardized training tails (floored at 1e-6), a dimension-robust
    parameter-free heuristic. Pass ``bandwidth`` to override.
    """
    if d.n < 2:
        raise DataError(f"kernel fit needs n >= 2, got n={d.n}")
    z, centers, scales = standardize(d)
    if bandwidth is None:
        bandwidth = _median_pairwise_distance(z.x)
    bandwidth = max(float(bandwidth), KERNEL_MIN_BANDWIDTH)
    return FittedModel(
        kind=Regressor.KERNEL,
        bandwidth=bandwidth,
        train_z=z.x,
        train_y=d.y,
        centers=_frozen(centers),
        scales=_frozen(scales),
    )


def kernel_weights(m: FittedModel, x_new: np.ndarray) -> np.ndarray:
    """Normalized kernel weights of each training row for each query row.

    The smallest squared distance is subtracted before exponentiation;
    the common factor cancels in the ratio, so the weights are exact but
    never all underflow.
    """
    z0 = transform_features(np.atleast_2d(x_new), m.centers, m.scales)
    d2 = ((z0[:, None, :] - m.train_z[None, :, :]) ** 2).sum(axis=-1)
    d2 -= d2.min(axis=1, keepdims=True)
    w = np.exp(-d2 / (2.0 * m.bandwidth**2))
    return w / w.sum(axis=1, keepdims=True)


def predict_many(m: FittedModel, x_new) -> np.ndarray:
    """Forecast at each row of ``x_new``."""
    x_new = np.atleast_2d(np.asarray(x_new, dtype=np.float64))
    if x_new.shape[1] != m.p:
        raise DataError(f"query has {x_new.shape[1]} features, model expects {m.p}")
    if m.kind is Regressor.KERNEL:
        return kernel_weights(m, x_new) @ m.train_y
    return m.intercept + x_new @ m.coefficients


def predict(m: FittedModel, x0) -> float:
    """Forecast at a single tail."""
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    return float(predict_many(m, x0[None, :])[0])


def fit(
    d: Dataset,
    kind,
    seed: int = 0,
    lam: float | None = None,
    bandwidth: float | None = None,
    folds: int = 5,
) -> FittedModel:
    """Dispatch to the chosen engine; hyperparameter overrides pass through."""
    kind = Regressor(kind)
    if kind is Regressor.OLS:
        return fit_ols(d)
    if kind is Regressor.LASSO:
        return fit_lasso(d, folds=folds, lam=lam, seed=seed)
    return fit_kernel(d, bandwidth=bandwidth)
