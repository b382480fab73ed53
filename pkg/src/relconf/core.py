"""Shared domain types, feature standardization, and CSV ingestion.

Everything downstream (regressors, interval constructors, relevance
selection, the experiment runner) works with the immutable containers
defined here: a labeled ``Dataset`` (tail matrix + head vector), a
``Query`` (an unlabeled tail), and the ``PredictionInterval`` record the
pipeline emits.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import math
from dataclasses import dataclass

import numpy as np

ARTIFACT_VERSION = "0.1.0"

__all__ = [
    "ARTIFACT_VERSION",
    "DataError",
    "ConfigError",
    "Regressor",
    "Similarity",
    "ConformalMethod",
    "IntervalPath",
    "Dataset",
    "Query",
    "PredictionInterval",
    "ExperimentConfig",
    "load_csv",
    "save_csv",
    "standardize",
    "transform_features",
    "subseed",
]


class DataError(ValueError):
    """Raised for malformed input data (bad files, bad shapes, non-finite cells)."""


class ConfigError(ValueError):
    """Raised for invalid configuration values or unknown config keys."""


class Regressor(str, enum.Enum):
    OLS = "ols"
    LASSO = "lasso"
    KERNEL = "kernel"


class Similarity(str, enum.Enum):
    PERCENTILE = "percentile"
    COSINE = "cosine"


class ConformalMethod(str, enum.Enum):
    FULL = "full"
    SPLIT = "split"
    JACKKNIFE = "jackknife"


class IntervalPath(str, enum.Enum):
    STANDARD = "standard"
    RELEVANT = "relevant"
    RELEVANT_SIMULATED = "relevant_simulated"


def _readonly(a: np.ndarray) -> np.ndarray:
    """Return a float64 copy flagged read-only (containers are immutable)."""
    out = np.array(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Dataset:
    """Labeled observations: an n x p tail matrix ``x`` and head vector ``y``.

    Parameters
    ----------
    x : ndarray of shape (n, p)
        Feature (tail) matrix.
    y : ndarray of shape (n,)
        Response (head) vector.
    feature_names : list of str
        One identifier per column of ``x``.
    head_name : str
        Identifier of the response.
    """

    x: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = ()
    head_name: str = "y"

    def __post_init__(self):
        x = _readonly(np.atleast_2d(self.x))
        y = _readonly(np.asarray(self.y, dtype=np.float64).ravel())
        if x.ndim != 2:
            raise DataError(f"x must be 2-D, got ndim={x.ndim}")
        n, p = x.shape
        if n < 1 or p < 1:
            raise DataError(f"dataset needs n >= 1 and p >= 1, got shape {x.shape}")
        if y.shape[0] != n:
            raise DataError(f"row mismatch: x has {n} rows, y has {y.shape[0]}")
        if not np.all(np.isfinite(x)):
            raise DataError("non-finite entry in feature matrix")
        if not np.all(np.isfinite(y)):
            raise DataError("non-finite entry in head vector")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise DataError(f"{len(names)} feature names for {p} columns")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, indices) -> "Dataset":
        """Dataset restricted to the given row indices (order preserved)."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.x[idx], self.y[idx], self.feature_names, self.head_name)


@dataclass(frozen=True)
class Query:
    """An unlabeled tail ``x0``; ``y0`` is held-out truth for evaluation only.

    No interval-producing operation may consult ``y0``.
    """

    x0: np.ndarray
    y0: float | None = None

    def __post_init__(self):
        x0 = _readonly(np.asarray(self.x0, dtype=np.float64).ravel())
        if x0.size < 1:
            raise DataError("query tail is empty")
        if not np.all(np.isfinite(x0)):
            raise DataError("non-finite entry in query tail")
        if self.y0 is not None and not math.isfinite(float(self.y0)):
            raise DataError("query head must be finite when present")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "y0", None if self.y0 is None else float(self.y0))

    @property
    def p(self) -> int:
        return self.x0.shape[0]


@dataclass(frozen=True)
class PredictionInterval:
    """A point forecast with lower/upper bounds and its provenance tags."""

    point: float
    lo: float
    up: float
    path: IntervalPath = IntervalPath.STANDARD
    conformal_method: ConformalMethod = ConformalMethod.SPLIT
    regressor: Regressor = Regressor.OLS
    degenerate: bool = False  # full conformal only: empty acceptance region

    def __post_init__(self):
        for name in ("point", "lo", "up"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DataError(f"interval field {name} is not finite")
            object.__setattr__(self, name, v)
        if self.lo > self.up:
            raise DataError(f"interval bounds inverted: lo={self.lo} > up={self.up}")

    @property
    def length(self) -> float:
        return self.up - self.lo


def _check_unit_interval(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 < value < 1.0) or not math.isfinite(value):
        raise ConfigError(f"{name} must lie strictly inside (0, 1), got {value}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the experiment grid: method choices plus the tuning knobs.

    ``alpha`` is the miscoverage level (also the selection fraction for
    percentile relevance), ``gamma`` the cosine-similarity threshold,
    ``rho`` the split-conformal training fraction, ``noise_scale`` the
    control perturbation as a fraction of per-feature spread.
    """

    alpha: float = 0.1
    gamma: float = 0.9
    rho: float = 0.5
    regressor: Regressor = Regressor.OLS
    similarity: Similarity = Similarity.PERCENTILE
    conformal_method: ConformalMethod = ConformalMethod.SPLIT
    noise_scale: float = 0.1
    min_relevant: int = 30
    seed: int = 0
    grid_points: int = 100
    grid_expansion: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_unit_interval("alpha", self.alpha))
        object.__setattr__(self, "gamma", _check_unit_interval("gamma", self.gamma))
        object.__setattr__(self, "rho", _check_unit_interval("rho", self.rho))
        object.__setattr__(self, "regressor", Regressor(self.regressor))
        object.__setattr__(self, "similarity", Similarity(self.similarity))
        object.__setattr__(
            self, "conformal_method", ConformalMethod(self.conformal_method)
        )
        if not (float(self.noise_scale) > 0.0):
            raise ConfigError(f"noise_scale must be > 0, got {self.noise_scale}")
        if int(self.min_relevant) < 2:
            raise ConfigError(f"min_relevant must be >= 2, got {self.min_relevant}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if int(self.grid_points) < 10:
            raise ConfigError(f"grid_points must be >= 10, got {self.grid_points}")
        if float(self.grid_expansion) < 0.0:
            raise ConfigError("grid_expansion must be >= 0")
        object.__setattr__(self, "noise_scale", float(self.noise_scale))
        object.__setattr__(self, "min_relevant", int(self.min_relevant))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "grid_points", int(self.grid_points))
        object.__setattr__(self, "grid_expansion", float(self.grid_expansion))


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _parse_cell(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"non-numeric cell {text!r} at data row {row}, column {column!r}"
        ) from None
    if not math.isfinite(value):
        raise DataError(f"non-finite cell {text!r} at data row {row}, column {column!r}")
    return value


def load_csv(path, head_column: str) -> Dataset:
    """Read a UTF-8 comma-separated file into a :class:`Dataset`.

    The file must have one header row; leading lines starting with ``#``
    are treated as comments and skipped. ``head_column`` becomes ``y``;
    all remaining columns become ``x`` in header order. Every cell must
    parse as a finite real; missing values are a hard error.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    if header.count(head_column) == 0:
        raise DataError(f"{path}: head column {head_column!r} not found in header")
    if header.count(head_column) > 1:
        raise DataError(f"{path}: head column {head_column!r} appears more than once")
    head_idx = header.index(head_column)
    feature_names = [h for i, h in enumerate(header) if i != head_idx]
    if not feature_names:
        raise DataError(f"{path}: no feature columns besides {head_column!r}")
    data = rows[1:]
    if not data:
        raise DataError(f"{path}: no data rows")
    y = np.empty(len(data))
    x = np.empty((len(data), len(feature_names)))
    for i, row in enumerate(data):
        if len(row) != len(header):
            raise DataError(
                f"{path}: data row {i + 1} has {len(row)} cells, expected {len(header)}"
            )
        k = 0
        for j, cell in enumerate(row):
            if j == head_idx:
                y[i] = _parse_cell(cell.strip(), i + 1, head_column)
            else:
                x[i, k] = _parse_cell(cell.strip(), i + 1, header[j])
                k += 1
    return Dataset(x, y, tuple(feature_names), head_column)


def save_csv(d: Dataset, path, comments: list[str] | None = None) -> None:
    """Write a Dataset as CSV (head column first), exactly round-trippable.

    Floats are written with ``repr`` so ``load_csv(save_csv(d)) == d``
    bit for bit. ``comments`` lines, if given, are emitted first with a
    leading ``#``.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([d.head_name, *d.feature_names])
        for i in range(d.n):
            writer.writerow([repr(float(d.y[i])), *(repr(float(v)) for v in d.x[i])])


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

def standardize(d: Dataset) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Center and scale each feature column to mean 0 and sample std 1.

    Uses the n-1 denominator. Zero-variance columns are centered only
    (scale fixed at 1) so degenerate columns cannot poison downstream
    distance computations. ``y`` is untouched.

    Returns
    -------
    (Dataset, centers, scales)
        The transformed dataset plus the per-column centers and scales,
        for applying the same transform to query tails.
    """
    if d.n < 2:
        raise DataError(f"standardize needs n >= 2, got n={d.n}")
    centers = d.x.mean(axis=0)
    scales = d.x.std(axis=0, ddof=1)
    scales = np.where(scales > 0.0, scales, 1.0)
    z = (d.x - centers) / scales
    return Dataset(z, d.y, d.feature_names, d.head_name), centers, scales


def transform_features(x, centers: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Apply a stored standardization to new rows or a single tail."""
    return (np.asarray(x, dtype=np.float64) - centers) / scales


# ---------------------------------------------------------------------------
# Seed derivation
# ---------------------------------------------------------------------------

def subseed(master: int, label: str, index: int = 0) -> int:
    """Derive a stable child seed from (master, label, index).

    Hash-based so that streams for different stages ("conformal",
    "controls", "cv", ...) and different query indices never collide or
    depend on evaluation order.
    """
    msg = f"{int(master)}:{label}:{int(index)}".encode()
    digest = hashlib.sha256(msg).digest()
    return int.from_bytes(digest[:8], "big") >> 1  # 63-bit, fits any RNG API
