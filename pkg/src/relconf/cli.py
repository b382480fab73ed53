"""Command-line front end.

Subcommands:

* ``gen``      write a synthetic suite to CSV (train.csv, queries.csv, labels.csv)
* ``run``      execute the full interval grid and emit result tables
* ``score``    recompute summary tables from an existing plotdata.csv
* ``selftest`` run a small built-in oracle suite, printing PASS/FAIL lines

Exit codes: 0 success, 1 configuration error, 2 data error.

``run`` reads an optional flat ``key=value`` config file; command-line
flags override file values, which override built-in defaults. Unknown
config keys are rejected by name.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import conformal, regress
from .core import (
    ARTIFACT_VERSION,
    ConfigError,
    ConformalMethod,
    DataError,
    Dataset,
    PredictionInterval,
    Regressor,
    save_csv,
)
from .dgp import SUITES, gen_setting
from .evaluate import Cell, score as score_interval
from .individualize import ControlMode
from .runner import RunManifest, run_grid, write_summary_csv

__all__ = ["main", "parse_config_file"]


def _csv_tuple(text: str) -> tuple[str, ...]:
    parts = tuple(p.strip() for p in text.split(",") if p.strip())
    if not parts:
        raise ConfigError(f"empty list value: {text!r}")
    return parts


# every accepted config-file key, with its parser; keys mirror RunManifest fields
_CONFIG_KEYS = {
    "suite": str,
    "train_csv": str,
    "queries_csv": str,
    "output_dir": str,
    "alpha": float,
    "gamma": float,
    "rho": float,
    "noise_scale": float,
    "grid_expansion": float,
    "min_relevant": int,
    "seed": int,
    "grid_points": int,
    "regressors": _csv_tuple,
    "methods": _csv_tuple,
    "similarities": _csv_tuple,
    "control_mode": str,
}


def parse_config_file(path) -> dict:
    """Flat ``key=value`` lines; ``#`` comments and blank lines ignored."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    settings: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            settings[key] = _CONFIG_KEYS[key](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return settings


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="relconf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"relconf {ARTIFACT_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a synthetic suite to CSV")
    gen.add_argument("--suite", choices=sorted(SUITES), default="small")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="data", help="output directory (default: %(default)s)")
    gen.set_defaults(func=_cmd_gen)

    run = sub.add_parser("run", help="execute the interval grid")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--suite", choices=("small", "long", "external-csv"))
    run.add_argument("--train", help="training CSV (external-csv suite)")
    run.add_argument("--queries", help="query CSV with a y0 column (external-csv suite)")
    run.add_argument("--alpha", type=float, help="miscoverage level (default 0.1)")
    run.add_argument("--gamma", type=float, help="cosine threshold (default 0.9)")
    run.add_argument("--rho", type=float, help="split training fraction (default 0.5)")
    run.add_argument("--noise-scale", type=float, help="control jitter scale (default 0.1)")
    run.add_argument("--min-relevant", type=int, help="selection floor (default 30)")
    run.add_argument("--seed", type=int, help="master seed (default 0)")
    run.add_argument("--grid-points", type=int, help="full-conformal grid size (default 100)")
    run.add_argument(
        "--grid-expansion", type=float, help="full-conformal range padding (default 0.25)"
    )
    run.add_argument(
        "--regressor", help="comma list from {ols,lasso,kernel} (default all)"
    )
    run.add_argument(
        "--method", help="comma list from {full,split,jackknife} (default all)"
    )
    run.add_argument(
        "--similarity", help="comma list from {percentile,cosine} (default both)"
    )
    run.add_argument(
        "--control-mode", choices=[m.value for m in ControlMode],
        help="synthetic control style (default perturb)",
    )
    run.add_argument("--out", help="output directory (default out)")
    run.set_defaults(func=_cmd_run)

    score = sub.add_parser("score", help="recompute summaries from plotdata.csv")
    score.add_argument("--in", dest="indir", required=True,
                       help="directory holding plotdata.csv (or the file itself)")
    score.add_argument("--out", help="output directory (default: same as --in)")
    score.set_defaults(func=_cmd_score)

    selftest = sub.add_parser("selftest", help="run the built-in oracle suite")
    selftest.set_defaults(func=_cmd_selftest)
    return parser


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def _cmd_gen(args) -> int:
    suite = SUITES[args.suite](args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    comments = [
        f"version={ARTIFACT_VERSION}",
        f"suite={args.suite}",
        f"seed={args.seed}",
    ]
    save_csv(suite.dataset, out / "train.csv", comments)
    qx = np.vstack([q.x0 for q in suite.queries])
    qy = np.array([q.y0 for q in suite.queries])
    save_csv(
        Dataset(qx, qy, feature_names=suite.dataset.feature_names, head_name="y0"),
        out / "queries.csv",
        comments,
    )
    label_lines = [f"# {c}" for c in comments]
    label_lines.append("kind,index,label")
    label_lines += [
        f"train,{i},{lab}" for i, lab in enumerate(suite.setting_labels)
    ]
    label_lines += [
        f"query,{i},{lab}" for i, lab in enumerate(suite.query_labels)
    ]
    (out / "labels.csv").write_text("\n".join(label_lines) + "\n")
    for name in ("train.csv", "queries.csv", "labels.csv"):
        print(f"wrote {out / name}")
    return 0


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

_FLAG_TO_FIELD = {
    "suite": "suite",
    "train": "train_csv",
    "queries": "queries_csv",
    "alpha": "alpha",
    "gamma": "gamma",
    "rho": "rho",
    "noise_scale": "noise_scale",
    "min_relevant": "min_relevant",
    "seed": "seed",
    "grid_points": "grid_points",
    "grid_expansion": "grid_expansion",
    "control_mode": "control_mode",
    "out": "output_dir",
}
_LIST_FLAG_TO_FIELD = {
    "regressor": "regressors",
    "method": "methods",
    "similarity": "similarities",
}


def _cmd_run(args) -> int:
    settings = parse_config_file(args.config) if args.config else {}
    for flag, field in _FLAG_TO_FIELD.items():
        value = getattr(args, flag)
        if value is not None:
            settings[field] = value
    for flag, field in _LIST_FLAG_TO_FIELD.items():
        value = getattr(args, flag)
        if value is not None:
            settings[field] = _csv_tuple(value)
    manifest = RunManifest(**settings)
    written = run_grid(manifest)
    for name in sorted(written):
        print(f"wrote {written[name]}")
    return 0


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------

def _cmd_score(args) -> int:
    source = Path(args.indir)
    plot_path = source if source.is_file() else source / "plotdata.csv"
    if not plot_path.exists():
        raise DataError(f"plotdata file not found: {plot_path}")
    out = Path(args.out) if args.out else plot_path.parent
    out.mkdir(parents=True, exist_ok=True)

    comments, header, rows = [], None, []
    for raw in plot_path.read_text().splitlines():
        if raw.startswith("#"):
            comments.append(raw[1:].strip())
        elif header is None:
            header = raw.split(",")
        elif raw:
            rows.append(dict(zip(header, raw.split(","))))
    if header is None or not rows:
        raise DataError(f"no usable rows in {plot_path}")

    by_similarity: dict[str, list] = {}
    for row in rows:
        if row["y0"] == "":
            continue
        iv = PredictionInterval(
            point=float(row["point"]),
            lo=float(row["lo"]),
            up=float(row["up"]),
            path=row["path"],
            conformal_method=row["method"],
            regressor=row["regressor"],
        )
        cell = Cell(
            path=row["path"],
            method=row["method"],
            regressor=row["regressor"],
            similarity=row["similarity"],
            query_id=row["query"],
        )
        by_similarity.setdefault(row["similarity"], []).append(
            score_interval(iv, float(row["y0"]), cell)
        )
    if not by_similarity:
        raise DataError(f"no scored rows (every y0 empty) in {plot_path}")
    for sim, metric_rows in by_similarity.items():
        path = out / f"summary_{sim}.csv"
        write_summary_csv(path, comments, metric_rows)
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

def _check_metric_arithmetic():
    row = score_interval(PredictionInterval(point=2.59, lo=1.36, up=3.8), y0=2.05)
    assert abs(row.a_dist - 0.54) < 1e-10
    assert abs(row.c_len - 2.44) < 1e-10
    assert abs(row.d_norm - 0.54 / 2.44) < 1e-10
    assert row.covered


def _check_ols_exact():
    x = np.linspace(0.0, 4.0, 9).reshape(-1, 1)
    d = Dataset(x, 2.0 * x[:, 0] + 1.0)
    m = regress.fit_ols(d)
    assert abs(m.intercept - 1.0) < 1e-10
    assert abs(m.coefficients[0] - 2.0) < 1e-10
    assert abs(regress.predict(m, [10.0]) - 21.0) < 1e-9


def _check_lasso_lambda0_is_ols():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(40, 3))
    d = Dataset(x, x @ np.array([1.0, -2.0, 0.5]) + rng.normal(size=40))
    ols = regress.fit_ols(d)
    lasso = regress.fit_lasso(d, lam=0.0)
    assert np.max(np.abs(lasso.coefficients - ols.coefficients)) < 1e-6
    assert abs(lasso.intercept - ols.intercept) < 1e-6


def _check_jackknife_press_identity():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 2))
    d = Dataset(x, x @ np.array([1.0, 1.0]) + rng.normal(size=20))
    fast = conformal.jackknife_residuals(d, Regressor.OLS)
    for i in range(d.n):
        rest = d.subset(np.delete(np.arange(d.n), i))
        m = regress.fit_ols(rest)
        naive = d.y[i] - regress.predict(m, d.x[i])
        assert abs(fast[i] - naive) < 1e-8


def _check_full_conformal_brute_force():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(8, 1))
    d = Dataset(x, 1.3 * x[:, 0] + rng.normal(scale=0.5, size=8))
    spec = conformal.ConformalSpec(
        method=ConformalMethod.FULL, alpha=0.2, grid_points=15
    )
    grid, accepted, _ = conformal.full_conformal_accepted(d, Regressor.OLS, [0.4], spec)
    k = math.ceil((d.n + 1) * 0.8 - 1e-9)
    for t, got in zip(grid, accepted):
        y_aug = np.concatenate([d.y, [t]])
        x_aug = np.vstack([d.x, [[0.4]]])
        m = regress.fit_ols(Dataset(x_aug, y_aug))
        r = np.abs(y_aug - regress.predict_many(m, x_aug))
        rank = 1 + int(np.sum(r[:-1] < r[-1]))
        assert got == (rank <= k)


def _check_split_coverage():
    spec = conformal.ConformalSpec(method=ConformalMethod.SPLIT, alpha=0.1)
    hits = 0
    for seed in range(60):
        d, q = gen_setting("A", seed=seed)
        iv = conformal.split_conformal(d, Regressor.OLS, q.x0, spec, seed=seed)
        hits += iv.lo <= q.y0 <= iv.up
    assert hits >= 45, f"coverage {hits}/60 too low"


_SELFTEST = [
    ("metric-arithmetic", _check_metric_arithmetic),
    ("ols-exact-fit", _check_ols_exact),
    ("lasso-lambda0-matches-ols", _check_lasso_lambda0_is_ols),
    ("jackknife-leave-one-out-identity", _check_jackknife_press_identity),
    ("full-conformal-brute-force", _check_full_conformal_brute_force),
    ("split-coverage-smoke", _check_split_coverage),
]


def _cmd_selftest(args) -> int:
    failures = 0
    for name, check in _SELFTEST:
        try:
            check()
        except Exception as exc:  # report and keep going
            failures += 1
            print(f"FAIL {name}: {exc}")
        else:
            print(f"PASS {name}")
    print(f"selftest: {len(_SELFTEST) - failures}/{len(_SELFTEST)} passed")
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
