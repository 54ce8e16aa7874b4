"""Cell-level cross-validation of the time-series weight alpha, the decay
lambda and the neighbor count k."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from medimpute.errors import DataError
from medimpute.knn import Hyperparams
from medimpute.panel import PanelDataset
from medimpute.solver import SolverConfig, med_impute

DEFAULT_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_LAMBDAS = (0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
DEFAULT_KS = (10,)
MAX_FOLD_ATTEMPTS = 10


@dataclass(frozen=True)
class HyperGrid:
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    ks: tuple[int, ...] = DEFAULT_KS
    per_feature: bool = False

    def __post_init__(self):
        for name in ("alphas", "lambdas", "ks"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"grid {name} must be non-empty")
            object.__setattr__(self, name, vals)
        if any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise ValueError("grid alphas must lie in [0, 1]")
        if any(not 0.0 < lam <= 1.0 for lam in self.lambdas):
            raise ValueError("grid lambdas must lie in (0, 1]")
        if any(int(k) < 1 for k in self.ks):
            raise ValueError("grid ks must be positive")

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "HyperGrid":
        return cls(
            alphas=tuple(float(a) for a in obj.get("alphas", DEFAULT_ALPHAS)),
            lambdas=tuple(float(v) for v in obj.get("lambdas", DEFAULT_LAMBDAS)),
            ks=tuple(int(k) for k in obj.get("ks", DEFAULT_KS)),
            per_feature=bool(obj.get("per_feature", False)),
        )

    def to_dict(self) -> dict:
        return {"alphas": list(self.alphas), "lambdas": list(self.lambdas),
                "ks": list(self.ks), "per_feature": self.per_feature}

    def points(self) -> list[tuple[float, float, int]]:
        return [(a, lam, k) for k in self.ks for a in self.alphas for lam in self.lambdas]


@dataclass
class CVReport:
    points: list[dict]
    selected: Hyperparams
    folds: int
    seed: int
    fold_sizes: list[int]
    feature_trials: list[dict] = field(default_factory=list)

    def to_dict(self, feature_names=None) -> dict:
        sel = self.selected.to_dict()
        if feature_names is not None:
            sel["features"] = list(feature_names)
        return {"folds": self.folds, "seed": self.seed, "fold_sizes": self.fold_sizes,
                "points": self.points, "selected": sel, "feature_trials": self.feature_trials}


def draw_folds(ds: PanelDataset, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Partition observed cells into ``folds`` random groups (sizes differ by
    at most one). A partition where hiding some fold would leave a column
    with no observed entry is re-drawn with a fresh sub-seed."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    obs_rows, obs_cols = np.nonzero(~ds.mask)
    if obs_rows.size < folds:
        raise DataError(f"only {obs_rows.size} observed cells for {folds} folds")
    per_col = np.bincount(obs_cols, minlength=ds.p)
    for attempt in range(MAX_FOLD_ATTEMPTS):
        rng = np.random.default_rng([seed, attempt])
        groups = np.array_split(rng.permutation(obs_rows.size), folds)
        ok = all(
            np.all(per_col - np.bincount(obs_cols[g], minlength=ds.p) > 0) for g in groups
        )
        if ok:
            return [(obs_rows[np.sort(g)], obs_cols[np.sort(g)]) for g in groups]
    raise DataError(f"could not draw {folds} folds that keep every column observed")


def _has_pairs(ds: PanelDataset) -> bool:
    return np.unique(ds.individual).size < ds.n_rows


class _Scorer:
    """Fold-averaged held-out error for a hyperparameter vector."""

    def __init__(self, ds: PanelDataset, folds, cfg: SolverConfig):
        self.ds = ds
        self.cfg = cfg
        self.folds = []
        for rows, cols in folds:
            mask = ds.mask.copy()
            mask[rows, cols] = True
            is_cont = cols < ds.p0
            truth_w = ds.continuous[rows[is_cont], cols[is_cont]]
            truth_v = ds.categorical[rows[~is_cont], cols[~is_cont] - ds.p0]
            self.folds.append((ds.with_values(mask=mask), rows, cols, is_cont, truth_w, truth_v))

    def score(self, hp: Hyperparams) -> dict:
        maes, mis, combined = [], [], []
        for masked, rows, cols, is_cont, truth_w, truth_v in self.folds:
            cm = med_impute(masked, self.cfg.with_hyperparams(hp)).completed
            abs_err = np.abs(cm.w[rows[is_cont], cols[is_cont]] - truth_w)
            wrong = cm.v[rows[~is_cont], cols[~is_cont] - self.ds.p0] != truth_v
            maes.append(abs_err.mean() if abs_err.size else np.nan)
            mis.append(wrong.mean() if wrong.size else np.nan)
            combined.append((abs_err.sum() + wrong.sum()) / (abs_err.size + wrong.size))
        return {
            "mae": _nanmean(maes),
            "misclassification": _nanmean(mis),
            "score": float(np.mean(combined)),
            "fold_scores": [float(c) for c in combined],
        }


def _nanmean(vals) -> float | None:
    arr = np.asarray(vals, dtype=float)
    return float(np.nanmean(arr)) if np.any(~np.isnan(arr)) else None


def _rank(entry: dict) -> tuple:
    # lower score, then smaller alpha, then larger lambda, then smaller k
    return (entry["score"], entry["alpha"], -entry["lambda"], entry["k"])


def cross_validate(ds: PanelDataset, grid: HyperGrid, folds: int, seed: int,
                   cfg: SolverConfig) -> CVReport:
    """Grid search over shared (alpha, lambda, k) scored by held-out error.

    The combined score pools absolute errors (standardized units) and
    categorical mismatches, so each kind counts in proportion to its share
    of held-out cells. With ``grid.per_feature`` a single greedy pass then
    re-tunes each feature's (alpha, lambda) with the others held fixed.
    """
    fold_cells = draw_folds(ds, folds, seed)
    scorer = _Scorer(ds, fold_cells, cfg)
    pairs = _has_pairs(ds)
    cache: dict[tuple, dict] = {}
    entries = []
    for a, lam, k in grid.points():
        if k >= ds.n_rows:
            raise ValueError(f"grid k={k} must be smaller than the row count {ds.n_rows}")
        # lambda (and alpha, without same-individual pairs) cannot change the solve
        key = (a, lam, k) if (a > 0 and pairs) else ("inert", k)
        if key not in cache:
            cache[key] = scorer.score(Hyperparams.shared(ds.p, a, lam, k))
        entries.append({"alpha": a, "lambda": lam, "k": k, "folds": folds, **cache[key]})
    best = min(entries, key=_rank)
    selected = Hyperparams.shared(ds.p, best["alpha"], best["lambda"], best["k"])

    trials = []
    if grid.per_feature:
        current = best["score"]
        for d in range(ds.p):
            options = []
            for a, lam in ((a, lam) for a in grid.alphas for lam in grid.lambdas):
                alpha, lam_vec = selected.alpha.copy(), selected.lam.copy()
                alpha[d], lam_vec[d] = a, lam
                hp = Hyperparams(alpha, lam_vec, selected.k)
                same = a == selected.alpha[d] and lam == selected.lam[d]
                score = current if same else scorer.score(hp)["score"]
                options.append({"feature": d, "alpha": a, "lambda": lam, "k": selected.k,
                                "score": score, "hp": hp})
            pick = min(options, key=_rank)
            selected, current = pick["hp"], pick["score"]
            trials.extend({k: v for k, v in o.items() if k != "hp"} for o in options)

    return CVReport(
        points=entries,
        selected=selected,
        folds=folds,
        seed=seed,
        fold_sizes=[int(r.size) for r, _ in fold_cells],
        feature_trials=trials,
    )
