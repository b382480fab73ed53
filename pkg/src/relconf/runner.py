"""End-to-end experiment driver.

``run_algorithm1`` produces the three intervals for one query under one
configuration: the standard interval on the full dataset, the relevant
interval on the similarity-selected subset, and the relevant+simulated
interval on the synthetic controls built from that subset. Paths 2 and 3
share one relevance selection, and all three paths share one conformal
seed per query so they differ only through the data they see.

``run_grid`` sweeps {full, split, jackknife} x {ols, lasso, kernel} x
{percentile, cosine} x all queries of a suite and writes deterministic
CSV outputs: per-query raw tables, aggregated summary tables, and a
flat plot-data file. Every CSV carries version, seed, and config hash
in ``#`` comment lines; no timestamps, so re-runs are byte-identical.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .conformal import ConformalSpec, conformal_interval
from .core import (
    ARTIFACT_VERSION,
    ConfigError,
    ConformalMethod,
    DataError,
    Dataset,
    ExperimentConfig,
    IntervalPath,
    PredictionInterval,
    Query,
    Regressor,
    Similarity,
    load_csv,
    subseed,
)
from .dgp import SUITES
from .evaluate import METHOD_LABELS, Cell, score, summary_table
from .individualize import ControlMode, select, simulate_controls

__all__ = [
    "RunManifest",
    "run_algorithm1",
    "run_grid",
    "write_summary_csv",
    "SUITE_NAMES",
]

SUITE_NAMES = ("small", "long", "external-csv")

_METHOD_ORDER = (ConformalMethod.FULL, ConformalMethod.SPLIT, ConformalMethod.JACKKNIFE)

# raw-table rows cover the linear engines only; kernel cells appear in the
# summary tables and plot data
_RAW_VARIANTS = (
    ("", Regressor.OLS, IntervalPath.STANDARD),
    ("r", Regressor.OLS, IntervalPath.RELEVANT),
    ("rs", Regressor.OLS, IntervalPath.RELEVANT_SIMULATED),
    ("l", Regressor.LASSO, IntervalPath.STANDARD),
    ("lr", Regressor.LASSO, IntervalPath.RELEVANT),
    ("lrs", Regressor.LASSO, IntervalPath.RELEVANT_SIMULATED),
)


def _min_rows(method, rho: float) -> int:
    """Smallest dataset each conformal method can run on."""
    method = ConformalMethod(method)
    if method is ConformalMethod.JACKKNIFE:
        return 3
    if method is ConformalMethod.FULL:
        return 2
    n = 4
    while not (2 <= math.floor(rho * n + 1e-9) <= n - 2):
        n += 1
    return n


def run_algorithm1(
    d: Dataset,
    q: Query,
    cfg: ExperimentConfig,
    query_index: int = 0,
    control_mode=ControlMode.PERTURB,
    scratch: dict | None = None,
) -> tuple[PredictionInterval, PredictionInterval, PredictionInterval]:
    """The three-path pipeline for one query.

    Returns (standard, relevant, relevant_simulated) intervals. The
    relevance selection is computed once and shared by paths 2 and 3;
    path 3 calibrates on the synthetic control rows cloned from it. The
    conformal stage of every path uses the same derived seed, so with a
    degenerate selection and vanishing noise the paths coincide.

    If the selection would be smaller than the conformal method's
    minimum sample size, the ``min_relevant`` floor is raised to that
    minimum; only a dataset below the minimum is a hard error.

    ``scratch`` is optional shared memo space for grid sweeps: pass the
    same dict across calls that keep the seed, the selection knobs, and
    the query_index -> dataset mapping fixed, and per-query work
    (standard intervals, selections, controls) is reused.
    """
    x0 = np.asarray(q.x0, dtype=float).ravel()
    if x0.size != d.p:
        raise DataError(f"query has {x0.size} features, dataset has {d.p}")
    needed = _min_rows(cfg.conformal_method, cfg.rho)
    if d.n < needed:
        raise DataError(
            f"{cfg.conformal_method.value} conformal needs n >= {needed}, got n={d.n}"
        )
    spec = ConformalSpec(
        method=cfg.conformal_method,
        alpha=cfg.alpha,
        rho=cfg.rho,
        grid_points=cfg.grid_points,
        grid_expansion=cfg.grid_expansion,
    )
    conformal_seed = subseed(cfg.seed, "conformal", query_index)
    scratch = {} if scratch is None else scratch

    key = ("standard", query_index, cfg.regressor.value, cfg.conformal_method.value)
    if key not in scratch:
        iv = conformal_interval(d, cfg.regressor, x0, spec, seed=conformal_seed)
        scratch[key] = replace(iv, path=IntervalPath.STANDARD)
    standard = scratch[key]

    min_rel = min(max(int(cfg.min_relevant), needed), d.n)
    key = ("selection", query_index, cfg.similarity.value, min_rel)
    if key not in scratch:
        scratch[key] = select(
            d, x0, cfg.similarity, alpha=cfg.alpha, gamma=cfg.gamma, min_relevant=min_rel
        )
    selection = scratch[key]

    iv = conformal_interval(
        d.subset(selection.indices), cfg.regressor, x0, spec, seed=conformal_seed
    )
    relevant = replace(iv, path=IntervalPath.RELEVANT)

    mode = ControlMode(control_mode)
    key = ("controls", query_index, cfg.similarity.value, min_rel, mode.value)
    if key not in scratch:
        scratch[key] = simulate_controls(
            d,
            selection,
            noise_scale=cfg.noise_scale,
            mode=mode,
            seed=subseed(cfg.seed, "controls", query_index),
        )
    controls = scratch[key]

    iv = conformal_interval(
        controls.simulated, cfg.regressor, x0, spec, seed=conformal_seed
    )
    simulated = replace(iv, path=IntervalPath.RELEVANT_SIMULATED)
    return standard, relevant, simulated


@dataclass(frozen=True)
class RunManifest:
    """Everything one grid run needs, hashable for exact re-runs.

    ``created`` is informational only: it is excluded from the config
    hash and never written into CSV outputs, so re-running the same
    manifest reproduces them byte for byte.
    """

    suite: str = "small"
    output_dir: str = "out"
    train_csv: str | None = None
    queries_csv: str | None = None
    alpha: float = 0.1
    gamma: float = 0.9
    rho: float = 0.5
    noise_scale: float = 0.1
    min_relevant: int = 30
    seed: int = 0
    grid_points: int = 100
    grid_expansion: float = 0.25
    regressors: tuple = (Regressor.OLS, Regressor.LASSO, Regressor.KERNEL)
    methods: tuple = _METHOD_ORDER
    similarities: tuple = (Similarity.PERCENTILE, Similarity.COSINE)
    control_mode: ControlMode = ControlMode.PERTURB
    created: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"),
        compare=False,
    )

    def __post_init__(self):
        if self.suite not in SUITE_NAMES:
            raise ConfigError(f"unknown suite {self.suite!r}; expected one of {SUITE_NAMES}")
        if self.suite == "external-csv" and not (self.train_csv and self.queries_csv):
            raise ConfigError("external-csv suite needs train_csv and queries_csv paths")
        try:
            object.__setattr__(
                self, "regressors", tuple(Regressor(r) for r in self.regressors)
            )
            object.__setattr__(
                self, "methods", tuple(ConformalMethod(m) for m in self.methods)
            )
            object.__setattr__(
                self, "similarities", tuple(Similarity(s) for s in self.similarities)
            )
            object.__setattr__(self, "control_mode", ControlMode(self.control_mode))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.regressors or not self.methods or not self.similarities:
            raise ConfigError("regressors, methods, and similarities must be non-empty")

    def _semantic_items(self) -> list[tuple[str, str]]:
        return [
            ("suite", self.suite),
            ("train_csv", self.train_csv or ""),
            ("queries_csv", self.queries_csv or ""),
            ("alpha", repr(float(self.alpha))),
            ("gamma", repr(float(self.gamma))),
            ("rho", repr(float(self.rho))),
            ("noise_scale", repr(float(self.noise_scale))),
            ("min_relevant", str(int(self.min_relevant))),
            ("seed", str(int(self.seed))),
            ("grid_points", str(int(self.grid_points))),
            ("grid_expansion", repr(float(self.grid_expansion))),
            ("regressors", "+".join(r.value for r in self.regressors)),
            ("methods", "+".join(m.value for m in self.methods)),
            ("similarities", "+".join(s.value for s in self.similarities)),
            ("control_mode", self.control_mode.value),
        ]

    def config_hash(self) -> str:
        blob = ";".join(f"{k}={v}" for k, v in self._semantic_items())
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def base_config(self, regressor, similarity, method) -> ExperimentConfig:
        return ExperimentConfig(
            alpha=self.alpha,
            gamma=self.gamma,
            rho=self.rho,
            regressor=regressor,
            similarity=similarity,
            conformal_method=method,
            noise_scale=self.noise_scale,
            min_relevant=self.min_relevant,
            seed=self.seed,
            grid_points=self.grid_points,
            grid_expansion=self.grid_expansion,
        )


def _load_grid_data(manifest: RunManifest):
    """Per-query training sets, queries, and display labels.

    The small suite pools all rows for every query (relevance selection
    is what separates the regimes); the long suite trains each query on
    its own generating block; external CSVs pool like the small suite.
    """
    if manifest.suite in SUITES:
        out = SUITES[manifest.suite](manifest.seed)
        if manifest.suite == "small":
            datasets = [out.dataset] * len(out.queries)
        else:
            labels = np.asarray(out.setting_labels)
            blocks = {
                lab: out.dataset.subset(np.flatnonzero(labels == lab))
                for lab in dict.fromkeys(out.setting_labels)
            }
            datasets = [blocks[lab] for lab in out.query_labels]
        return datasets, list(out.queries), list(out.query_labels)
    train = load_csv(manifest.train_csv, head_column="y")
    qd = load_csv(manifest.queries_csv, head_column="y0")
    if qd.p != train.p or qd.feature_names != train.feature_names:
        raise DataError(
            f"query features {qd.feature_names} do not match training features "
            f"{train.feature_names}"
        )
    queries = [Query(qd.x[i], float(qd.y[i])) for i in range(qd.n)]
    return [train] * qd.n, queries, [str(i + 1) for i in range(qd.n)]


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _write_csv(path: Path, comments: list[str], header: list[str], rows) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    lines.extend(",".join(r) for r in rows)
    path.write_text("\n".join(lines) + "\n")


def _raw_table(results: dict, sim: Similarity, y0s: list, n_queries: int):
    header = ["variable"] + [
        f"{METHOD_LABELS[m]}_q{k + 1}" for m in _METHOD_ORDER for k in range(n_queries)
    ]
    rows = [
        ["y0"] + [_fmt(y0s[k]) for _ in _METHOD_ORDER for k in range(n_queries)]
    ]
    for attr, prefix in (("point", "pred"), ("lo", "lo"), ("up", "up")):
        for code, reg, path in _RAW_VARIANTS:
            cells = []
            for m in _METHOD_ORDER:
                for k in range(n_queries):
                    iv = results.get((sim.value, k, reg.value, m.value, path.value))
                    cells.append(_fmt(getattr(iv, attr)) if iv is not None else "")
            rows.append([prefix + code] + cells)
    return header, rows


def write_summary_csv(path: Path, comments: list[str], metric_rows: list) -> None:
    """The 36-row aggregated table as label,General,Conformal,Split,Jackknife."""
    header = ["label", "General", "Conformal", "Split", "Jackknife"]
    rows = [
        [label] + [_fmt(columns[c]) for c in header[1:]]
        for label, columns in summary_table(metric_rows)
    ]
    _write_csv(path, comments, header, rows)


def run_grid(manifest: RunManifest) -> dict[str, str]:
    """Execute the full grid and write output files; returns name -> path."""
    out_dir = Path(manifest.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    datasets, queries, qlabels = _load_grid_data(manifest)

    results: dict[tuple, PredictionInterval] = {}
    metric_rows: dict[str, list] = {s.value: [] for s in manifest.similarities}
    scratch: dict = {}
    for qidx, (d, q, qlabel) in enumerate(zip(datasets, queries, qlabels)):
        for sim in manifest.similarities:
            for reg in manifest.regressors:
                for method in manifest.methods:
                    cfg = manifest.base_config(reg, sim, method)
                    triple = run_algorithm1(
                        d,
                        q,
                        cfg,
                        query_index=qidx,
                        control_mode=manifest.control_mode,
                        scratch=scratch,
                    )
                    for iv in triple:
                        key = (sim.value, qidx, reg.value, method.value, iv.path.value)
                        results[key] = iv
                        if q.y0 is not None:
                            cell = Cell(
                                path=iv.path.value,
                                method=method.value,
                                regressor=reg.value,
                                similarity=sim.value,
                                query_id=str(qidx + 1),
                            )
                            metric_rows[sim.value].append(score(iv, q.y0, cell))

    comments = [
        f"version={ARTIFACT_VERSION}",
        f"seed={manifest.seed}",
        f"config_hash={manifest.config_hash()}",
    ]
    written: dict[str, str] = {}
    y0s = [q.y0 for q in queries]
    for sim in manifest.similarities:
        raw_path = out_dir / f"raw_{sim.value}.csv"
        header, rows = _raw_table(results, sim, y0s, len(queries))
        _write_csv(raw_path, comments, header, rows)
        written[f"raw_{sim.value}"] = str(raw_path)

        summary_path = out_dir / f"summary_{sim.value}.csv"
        write_summary_csv(summary_path, comments, metric_rows[sim.value])
        written[f"summary_{sim.value}"] = str(summary_path)

    plot_path = out_dir / "plotdata.csv"
    plot_header = [
        "similarity", "query", "query_label", "path", "method", "regressor",
        "y0", "point", "lo", "up", "residual", "covered", "degenerate",
    ]
    plot_rows = []
    for sim in manifest.similarities:
        for qidx, (q, qlabel) in enumerate(zip(queries, qlabels)):
            for reg in manifest.regressors:
                for method in manifest.methods:
                    for path_tag in IntervalPath:
                        iv = results[
                            (sim.value, qidx, reg.value, method.value, path_tag.value)
                        ]
                        has_y0 = q.y0 is not None
                        plot_rows.append([
                            sim.value,
                            str(qidx + 1),
                            qlabel,
                            path_tag.value,
                            method.value,
                            reg.value,
                            _fmt(q.y0) if has_y0 else "",
                            _fmt(iv.point),
                            _fmt(iv.lo),
                            _fmt(iv.up),
                            _fmt(q.y0 - iv.point) if has_y0 else "",
                            str(int(iv.lo <= q.y0 <= iv.up)) if has_y0 else "",
                            str(int(iv.degenerate)),
                        ])
    _write_csv(plot_path, comments, plot_header, plot_rows)
    written["plotdata"] = str(plot_path)

    manifest_path = out_dir / "manifest.txt"
    manifest_lines = [f"version={ARTIFACT_VERSION}", f"created={manifest.created}"]
    manifest_lines += [f"{k}={v}" for k, v in manifest._semantic_items()]
    manifest_lines += [
        f"output_dir={manifest.output_dir}",
        f"config_hash={manifest.config_hash()}",
    ]
    manifest_path.write_text("\n".join(manifest_lines) + "\n")
    written["manifest"] = str(manifest_path)
    return written
