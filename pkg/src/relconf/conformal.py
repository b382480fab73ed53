"""Conformal prediction intervals: split, full (transductive), and jackknife.

All three constructors share the same nonconformity score (the absolute
residual) and the same finite-sample rank conventions:

* split:     d* = k-th smallest calibration residual, k = ceil((m+1)(1-a))
* jackknife: d* = k-th smallest leave-one-out residual, k = ceil(n(1-a))
* full:      candidate accepted iff its residual rank among all n+1 is
             <= ceil((n+1)(1-a)); rank counts strictly smaller residuals,
             so ties favor acceptance.

Ceilings are evaluated with a 1e-9 guard so that quantities like 10 * 0.9
(which floats render as 9.000000000000002) land on the intended integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigError,
    ConformalMethod,
    DataError,
    Dataset,
    PredictionInterval,
    Regressor,
)
from .regress import fit, fit_kernel, fit_lasso, fit_ols, kernel_weights, predict, predict_many

__all__ = [
    "ConformalSpec",
    "conformal_interval",
    "split_conformal",
    "full_conformal",
    "full_conformal_accepted",
    "jackknife_conformal",
    "jackknife_residuals",
    "ceil_guarded",
    "split_quantile",
    "loo_quantile",
]

_CEIL_GUARD = 1e-9


def ceil_guarded(x: float) -> int:
    """Ceiling that forgives float dust just above an integer."""
    return math.ceil(x - _CEIL_GUARD)


@dataclass(frozen=True)
class ConformalSpec:
    """Method choice plus the knobs it needs.

    ``rho`` only matters for split; ``grid_points``/``grid_expansion``
    only for full.
    """

    method: ConformalMethod
    alpha: float = 0.1
    rho: float = 0.5
    grid_points: int = 100
    grid_expansion: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "method", ConformalMethod(self.method))
        for name in ("alpha", "rho"):
            v = float(getattr(self, name))
            if not (0.0 < v < 1.0):
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
            object.__setattr__(self, name, v)
        if int(self.grid_points) < 10:
            raise ConfigError(f"grid_points must be >= 10, got {self.grid_points}")
        if float(self.grid_expansion) < 0.0:
            raise ConfigError("grid_expansion must be >= 0")
        object.__setattr__(self, "grid_points", int(self.grid_points))
        object.__setattr__(self, "grid_expansion", float(self.grid_expansion))


def split_quantile(abs_residuals: np.ndarray, alpha: float) -> float:
    """k-th smallest with k = ceil((m+1)(1-alpha)), clamped to [1, m]."""
    m = len(abs_residuals)
    k = min(max(ceil_guarded((m + 1) * (1.0 - alpha)), 1), m)
    return float(np.partition(np.asarray(abs_residuals, dtype=float), k - 1)[k - 1])


def loo_quantile(abs_residuals: np.ndarray, alpha: float) -> float:
    """k-th smallest with k = ceil(n(1-alpha)), clamped to [1, n]."""
    n = len(abs_residuals)
    k = min(max(ceil_guarded(n * (1.0 - alpha)), 1), n)
    return float(np.partition(np.asarray(abs_residuals, dtype=float), k - 1)[k - 1])


# ---------------------------------------------------------------------------
# Split conformal
# ---------------------------------------------------------------------------

def split_conformal(
    d: Dataset,
    reg,
    x0,
    spec: ConformalSpec,
    seed: int,
    lam: float | None = None,
    bandwidth: float | None = None,
) -> PredictionInterval:
    """Fit on a seeded ``rho`` fraction, calibrate on the held-out rest.

    The interval is the base forecast plus/minus the calibration
    residual quantile. Both partition cells must get at least 2 rows.
    """
    reg = Regressor(reg)
    n_train = int(math.floor(spec.rho * d.n + _CEIL_GUARD))
    if not (2 <= n_train <= d.n - 2):
        raise DataError(
            f"split needs 2 <= floor(rho*n) <= n-2; rho={spec.rho}, n={d.n}"
        )
    perm = np.random.default_rng(seed).permutation(d.n)
    train, cal = d.subset(perm[:n_train]), d.subset(perm[n_train:])
    model = fit(train, reg, seed=seed, lam=lam, bandwidth=bandwidth)
    point = predict(model, x0)
    resid = np.abs(cal.y - predict_many(model, cal.x))
    dstar = split_quantile(resid, spec.alpha)
    return PredictionInterval(
        point, point - dstar, point + dstar,
        conformal_method=ConformalMethod.SPLIT, regressor=reg,
    )


# ---------------------------------------------------------------------------
# Full (transductive) conformal
# ---------------------------------------------------------------------------

def _candidate_grid(y: np.ndarray, spec: ConformalSpec) -> np.ndarray:
    lo, hi = float(y.min()), float(y.max())
    e = spec.grid_expansion * (hi - lo)
    return np.linspace(lo - e, hi + e, spec.grid_points)


def full_conformal_accepted(
    d: Dataset,
    reg,
    x0,
    spec: ConformalSpec,
    seed: int = 0,
    lam: float | None = None,
    bandwidth: float | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Candidate grid, per-candidate acceptance mask, and the base forecast.

    Each candidate head is appended to the data and the model refit; the
    candidate survives when its absolute residual ranks within the lowest
    ceil((n+1)(1-alpha)) of all n+1. LASSO refits reuse the penalty of
    the base fit (re-running cross-validation per candidate is pointless
    and slow); the kernel refit is computed once because its weights
    depend only on the tails, which all candidates share.
    """
    reg = Regressor(reg)
    x0 = np.asarray(x0, dtype=float).ravel()
    base = fit(d, reg, seed=seed, lam=lam, bandwidth=bandwidth)
    point = predict(base, x0)
    grid = _candidate_grid(d.y, spec)
    n = d.n
    x_aug = np.vstack([d.x, x0])
    k_accept = min(max(ceil_guarded((n + 1) * (1.0 - spec.alpha)), 1), n + 1)

    if reg is Regressor.KERNEL:
        km = fit_kernel(Dataset(x_aug, np.zeros(n + 1)), bandwidth=bandwidth)
        w = kernel_weights(km, x_aug)
        y_pad = np.append(d.y, 0.0)
        a = y_pad - w @ y_pad
        e_last = np.zeros(n + 1)
        e_last[n] = 1.0
        b = e_last - w[:, n]
        resid = np.abs(a[:, None] + b[:, None] * grid[None, :])  # (n+1, grid)
        ranks = 1 + (resid[:n, :] < resid[n, :][None, :]).sum(axis=0)
        return grid, ranks <= k_accept, point

    accepted = np.zeros(grid.size, dtype=bool)
    lam_used = base.lam if reg is Regressor.LASSO else None
    for g, trial in enumerate(grid):
        y_aug = np.append(d.y, trial)
        if reg is Regressor.OLS:
            m = fit_ols(Dataset(x_aug, y_aug))
        else:
            m = fit_lasso(Dataset(x_aug, y_aug), lam=lam_used)
        resid = np.abs(y_aug - predict_many(m, x_aug))
        rank = 1 + int((resid[:n] < resid[n]).sum())
        accepted[g] = rank <= k_accept
    return grid, accepted, point


def full_conformal(
    d: Dataset,
    reg,
    x0,
    spec: ConformalSpec,
    seed: int = 0,
    lam: float | None = None,
    bandwidth: float | None = None,
) -> PredictionInterval:
    """[min accepted, max accepted] over the candidate grid.

    An empty acceptance region degrades to a zero-length interval at the
    base forecast, flagged ``degenerate`` so downstream metrics can see it.
    """
    grid, accepted, point = full_conformal_accepted(
        d, reg, x0, spec, seed=seed, lam=lam, bandwidth=bandwidth
    )
    reg = Regressor(reg)
    if not accepted.any():
        return PredictionInterval(
            point, point, point,
            conformal_method=ConformalMethod.FULL, regressor=reg, degenerate=True,
        )
    kept = grid[accepted]
    return PredictionInterval(
        point, float(kept.min()), float(kept.max()),
        conformal_method=ConformalMethod.FULL, regressor=reg,
    )


# ---------------------------------------------------------------------------
# Jackknife conformal
# ---------------------------------------------------------------------------

def jackknife_residuals(
    d: Dataset,
    reg,
    seed: int = 0,
    lam: float | None = None,
    bandwidth: float | None = None,
) -> np.ndarray:
    """Signed leave-one-out residuals y_i - f_{-i}(x_i).

    OLS uses the exact leave-one-out identity e_i / (1 - h_ii) (equal to
    literal per-row refits for full-rank designs) and falls back to the
    naive loop when the design is rank-deficient or a leverage reaches 1.
    LASSO refits per row at a fixed penalty (the base fit's CV choice
    unless ``lam`` is given). The kernel engine keeps the full-data
    standardization and bandwidth and drops row i's own weight, the LOO
    analogue of its fixed-tail refit in full conformal.
    """
    reg = Regressor(reg)
    n = d.n
    if reg is Regressor.OLS:
        a = np.column_stack([np.ones(n), d.x])
        coef, _, rank, _ = np.linalg.lstsq(a, d.y, rcond=None)
        e = d.y - a @ coef
        if rank == a.shape[1]:
            h = np.einsum("ij,ji->i", a, np.linalg.pinv(a))
            if np.max(h) < 1.0 - 1e-8:
                return e / (1.0 - h)
        out = np.empty(n)
        for i in range(n):
            rest = np.delete(np.arange(n), i)
            m = fit_ols(d.subset(rest))
            out[i] = d.y[i] - predict(m, d.x[i])
        return out
    if reg is Regressor.LASSO:
        if lam is None:
            lam = fit_lasso(d, seed=seed).lam
        out = np.empty(n)
        for i in range(n):
            rest = np.delete(np.arange(n), i)
            m = fit_lasso(d.subset(rest), lam=lam)
            out[i] = d.y[i] - predict(m, d.x[i])
        return out
    km = fit_kernel(d, bandwidth=bandwidth)
    z = km.train_z
    d2 = ((z[:, None, :] - z[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    d2 -= d2.min(axis=1, keepdims=True)
    w = np.exp(-d2 / (2.0 * km.bandwidth**2))
    return d.y - (w @ d.y) / w.sum(axis=1)


def jackknife_conformal(
    d: Dataset,
    reg,
    x0,
    spec: ConformalSpec,
    seed: int = 0,
    lam: float | None = None,
    bandwidth: float | None = None,
) -> PredictionInterval:
    """Base forecast plus/minus the leave-one-out residual quantile."""
    if d.n < 3:
        raise DataError(f"jackknife needs n >= 3, got n={d.n}")
    reg = Regressor(reg)
    base = fit(d, reg, seed=seed, lam=lam, bandwidth=bandwidth)
    point = predict(base, x0)
    lam_used = base.lam if reg is Regressor.LASSO else None
    bw_used = base.bandwidth if reg is Regressor.KERNEL else None
    loo = np.abs(jackknife_residuals(d, reg, seed=seed, lam=lam_used, bandwidth=bw_used))
    dstar = loo_quantile(loo, spec.alpha)
    return PredictionInterval(
        point, point - dstar, point + dstar,
        conformal_method=ConformalMethod.JACKKNIFE, regressor=reg,
    )


def conformal_interval(
    d: Dataset,
    reg,
    x0,
    spec: ConformalSpec,
    seed: int = 0,
    lam: float | None = None,
    bandwidth: float | None = None,
) -> PredictionInterval:
    """Dispatch on ``spec.method``."""
    if spec.method is ConformalMethod.SPLIT:
        return split_conformal(d, reg, x0, spec, seed, lam=lam, bandwidth=bandwidth)
    if spec.method is ConformalMethod.FULL:
        return full_conformal(d, reg, x0, spec, seed=seed, lam=lam, bandwidth=bandwidth)
    return jackknife_conformal(d, reg, x0, spec, seed=seed, lam=lam, bandwidth=bandwidth)
