"""Experiment orchestration: missing-fraction sweeps, observations-per-
individual sweeps, and report emission (JSON + flat CSVs)."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from medimpute.downstream import downstream_auc, imputation_error
from medimpute.knn import Hyperparams
from medimpute.panel import (
    PanelDataset,
    SynthConfig,
    apply_mcar_mask,
    keep_most_recent,
    load_csv,
    load_labels_csv,
    load_schema,
    standardize,
    synth_panel,
)
from medimpute.selection import HyperGrid, cross_validate
from medimpute.solver import SolverConfig, impute

log = logging.getLogger(__name__)

METHODS = {"mean": "mean", "opt": "opt_impute", "opt_impute": "opt_impute",
           "med": "med_impute", "med_impute": "med_impute"}
ROW_COLUMNS = [
    "sweep", "method", "fraction", "opp", "seed", "mae", "misclassification", "auc",
    "seconds", "alpha", "lambda", "k", "n_masked", "n_continuous", "n_categorical",
    "excluded_individuals",
]
METRICS = ("mae", "misclassification", "auc", "seconds")
CURVE_METRICS = ("mae", "misclassification", "auc")
# wall-clock fields; everything else is a function of config + seeds
TIMING_FIELDS = ("seconds", "generated_at")


@dataclass
class ExperimentConfig:
    data: dict[str, Any] = field(default_factory=lambda: {"synthetic": {}})
    methods: list[str] = field(default_factory=lambda: ["mean", "opt_impute", "med_impute"])
    fractions: list[float] = field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5])
    opp: list[int] = field(default_factory=lambda: [1, 2, 4, 6, 8, 10])
    opp_fraction: float = 0.5
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    sweeps: list[str] = field(default_factory=lambda: ["missingness", "opp"])
    solver: dict[str, Any] = field(default_factory=dict)
    alpha: float = 0.5
    lam: float = 0.5
    cv: dict[str, Any] = field(default_factory=lambda: {"enabled": True})
    reg: float | None = None
    out_dir: str | None = None

    def __post_init__(self):
        if not self.methods:
            raise ValueError("methods must be non-empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}")
        self.methods = [METHODS[m] for m in self.methods]
        if any(not 0.0 < f <= 1.0 for f in self.fractions):
            raise ValueError("fractions must lie in (0, 1]")
        if not 0.0 < self.opp_fraction <= 1.0:
            raise ValueError("opp_fraction must lie in (0, 1]")
        if any(int(k) < 1 for k in self.opp):
            raise ValueError("opp values must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if set(self.sweeps) - {"missingness", "opp"}:
            raise ValueError("sweeps must be drawn from {'missingness', 'opp'}")

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ExperimentConfig":
        obj = dict(obj)
        if "lambda" in obj:
            obj["lam"] = obj.pop("lambda")
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    # derived settings -------------------------------------------------
    def solver_config(self, p: int, seed: int, overrides: dict | None = None) -> SolverConfig:
        opts = {**self.solver, **(overrides or {})}
        hp = Hyperparams.shared(p, self.alpha, self.lam, int(opts.get("k", 10)))
        return SolverConfig(
            hyperparams=hp,
            max_sweeps=int(opts.get("max_sweeps", 50)),
            rel_tolerance=float(opts.get("rel_tolerance", 1e-6)),
            n_restarts=int(opts.get("n_restarts", 5)),
            seed=seed,
        )

    @property
    def cv_enabled(self) -> bool:
        return bool(self.cv.get("enabled", False))


@dataclass
class ExperimentReport:
    rows: list[dict[str, Any]]
    config: dict[str, Any]
    seeds: list[int]

    def aggregates(self) -> list[dict[str, Any]]:
        """Mean and sample sd over seeds per (sweep, method, fraction, opp)."""
        groups: dict[tuple, list[dict]] = {}
        for row in self.rows:
            groups.setdefault((row["sweep"], row["method"], row["fraction"], row["opp"]), []).append(row)
        out = []
        for (sweep, method, fraction, opp), rows in groups.items():
            entry = {"sweep": sweep, "method": method, "fraction": fraction, "opp": opp, "n": len(rows)}
            for metric in METRICS:
                vals = np.array([r[metric] for r in rows if r[metric] is not None], dtype=float)
                entry[f"{metric}_mean"] = float(vals.mean()) if vals.size else None
                entry[f"{metric}_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else None
            out.append(entry)
        return out

    def extend(self, other: "ExperimentReport") -> "ExperimentReport":
        return ExperimentReport(self.rows + other.rows, self.config, self.seeds)


def load_experiment_data(cfg: ExperimentConfig) -> tuple[PanelDataset, np.ndarray]:
    """Standardized ground-truth dataset and per-individual labels."""
    data = cfg.data
    if "synthetic" in data:
        ds, labels = synth_panel(SynthConfig.from_dict(data["synthetic"] or {}))
    elif "csv" in data:
        ds = load_csv(data["csv"], load_schema(data["schema"]))
        labels = load_labels_csv(ds, data["labels"])
    else:
        raise ValueError("data must name either 'synthetic' or 'csv' (+ 'schema', 'labels')")
    ds, _ = standardize(ds)
    return ds, labels


def _clean(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def _run_condition(cfg: ExperimentConfig, ds: PanelDataset, labels: np.ndarray, sweep: str,
                   fraction: float, opp: int, seed: int, excluded: int = 0) -> list[dict]:
    masked, record = apply_mcar_mask(ds, fraction, seed)
    rows = []
    for method in cfg.methods:
        context = f"[sweep={sweep} method={method} fraction={fraction} opp={opp} seed={seed}]"
        try:
            t0 = time.perf_counter()
            solver_cfg = cfg.solver_config(ds.p, seed)
            hp = solver_cfg.hyperparams if method != "mean" else None
            if method == "med_impute" and cfg.cv_enabled:
                grid = HyperGrid.from_dict(cfg.cv.get("grid", {}))
                cv_cfg = cfg.solver_config(ds.p, seed, cfg.cv.get("solver"))
                hp = cross_validate(masked, grid, int(cfg.cv.get("folds", 3)), seed, cv_cfg).selected
                solver_cfg = solver_cfg.with_hyperparams(hp)
            result = impute(masked, "med" if method == "med_impute" else method, solver_cfg)
            seconds = time.perf_counter() - t0
            metrics = imputation_error(result.completed, record)
            score = downstream_auc(masked, result.completed, labels, seed, cfg.reg)
        except Exception as exc:
            raise _annotated(exc, context) from exc
        if method == "opt_impute":
            alpha = 0.0
        elif hp is not None and np.all(hp.alpha == hp.alpha[0]):
            alpha = float(hp.alpha[0])
        else:
            alpha = hp.alpha.tolist() if hp is not None else None
        lam = None if hp is None else (float(hp.lam[0]) if np.all(hp.lam == hp.lam[0]) else hp.lam.tolist())
        rows.append({
            "sweep": sweep, "method": method, "fraction": fraction, "opp": opp, "seed": seed,
            "mae": _clean(metrics.mae), "misclassification": _clean(metrics.misclassification),
            "auc": _clean(score), "seconds": seconds,
            "alpha": alpha, "lambda": lam, "k": None if hp is None else hp.k,
            "n_masked": len(record), "n_continuous": metrics.n_continuous,
            "n_categorical": metrics.n_categorical, "excluded_individuals": excluded,
        })
        log.info("%s mae=%.4f auc=%.4f (%.1fs)", context, metrics.mae, score, seconds)
    return rows


def _annotated(exc: Exception, context: str) -> Exception:
    try:
        return type(exc)(f"{context} {exc}")
    except TypeError:
        return RuntimeError(f"{context} {exc!r}")


def _max_opp(ds: PanelDataset) -> int:
    return int(np.bincount(ds.individual).max())


def run_missingness_sweep(cfg: ExperimentConfig, data=None) -> ExperimentReport:
    """Every method on the same mask per (fraction, seed)."""
    ds, labels = data if data is not None else load_experiment_data(cfg)
    rows = []
    for fraction in cfg.fractions:
        for seed in cfg.seeds:
            rows += _run_condition(cfg, ds, labels, "missingness", fraction, _max_opp(ds), seed)
    return ExperimentReport(rows, cfg.to_dict(), list(cfg.seeds))


def run_opp_sweep(cfg: ExperimentConfig, data=None) -> ExperimentReport:
    """Truncate to each individual's k latest rows, then mask at the fixed
    fraction. Individuals with fewer than k rows are dropped and counted."""
    ds, labels = data if data is not None else load_experiment_data(cfg)
    rows = []
    for k in cfg.opp:
        sub, kept, dropped = keep_most_recent(ds, int(k))
        if dropped:
            log.warning("opp=%d: %d individuals with fewer rows excluded", k, dropped)
        for seed in cfg.seeds:
            rows += _run_condition(cfg, sub, labels[kept], "opp", cfg.opp_fraction, int(k), seed, dropped)
    return ExperimentReport(rows, cfg.to_dict(), list(cfg.seeds))


def run_benchmark(cfg: ExperimentConfig) -> ExperimentReport:
    data = load_experiment_data(cfg)
    report = ExperimentReport([], cfg.to_dict(), list(cfg.seeds))
    if "missingness" in cfg.sweeps:
        report = report.extend(run_missingness_sweep(cfg, data))
    if "opp" in cfg.sweeps:
        report = report.extend(run_opp_sweep(cfg, data))
    return report


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, list):
        return ";".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_report(report: ExperimentReport, out_dir: str | Path, version: str | None = None) -> list[Path]:
    """Write report.json, report.csv and curves.csv; returns their paths."""
    from medimpute import __version__

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    aggregates = report.aggregates()
    doc = {
        "software": {"name": "medimpute", "version": version or __version__},
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": report.config,
        "seeds": report.seeds,
        "rows": report.rows,
        "aggregates": aggregates,
    }
    paths = [out / "report.json", out / "report.csv", out / "curves.csv"]
    paths[0].write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
    with open(paths[1], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for row in report.rows:
            w.writerow([_csv_value(row[c]) for c in ROW_COLUMNS])
    with open(paths[2], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "method", "x_variable", "x", "metric", "mean", "sd", "n"])
        for agg in aggregates:
            x_var = "fraction" if agg["sweep"] == "missingness" else "opp"
            for metric in CURVE_METRICS:
                w.writerow([agg["sweep"], agg["method"], x_var, _csv_value(agg[x_var]), metric,
                            _csv_value(agg[f"{metric}_mean"]), _csv_value(agg[f"{metric}_sd"]), agg["n"]])
    return paths
