"""Imputation error metrics and the downstream risk-model evaluation:
l1-regularized logistic regression on each individual's latest observation,
scored by out-of-sample AUC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from medimpute.errors import DataError
from medimpute.knn import CompletedMatrix
from medimpute.panel import MaskRecord, PanelDataset

REG_GRID = (1e-3, 1e-2, 1e-1)


@dataclass
class MetricReport:
    mae: float
    misclassification: float
    n_continuous: int
    n_categorical: int
    per_feature_mae: dict[int, float] = field(default_factory=dict)

    def to_dict(self, names=None) -> dict:
        per = {(names[d] if names else str(d)): v for d, v in self.per_feature_mae.items()}
        return {"mae": self.mae, "misclassification": self.misclassification,
                "n_continuous": self.n_continuous, "n_categorical": self.n_categorical,
                "per_feature_mae": per}


def imputation_error(imputed: CompletedMatrix, record: MaskRecord) -> MetricReport:
    """MAE over hidden continuous cells, error rate over hidden categorical
    cells. A kind with no hidden cells reports NaN."""
    if len(record) == 0:
        raise DataError("nothing to score: mask record is empty")
    if record.rows.max() >= imputed.n_rows or record.cols.max() >= imputed.p0 + imputed.v.shape[1]:
        raise DataError("mask record refers to cells outside the matrix")
    cont = record.is_continuous
    rc, cc = record.rows[cont], record.cols[cont]
    abs_err = np.abs(imputed.w[rc, cc] - record.values[cont])
    wrong = imputed.v[record.rows[~cont], record.cols[~cont] - imputed.p0] != record.values[~cont]
    per = {int(d): float(abs_err[cc == d].mean()) for d in np.unique(cc)}
    return MetricReport(
        mae=float(abs_err.mean()) if abs_err.size else float("nan"),
        misclassification=float(wrong.mean()) if wrong.size else float("nan"),
        n_continuous=int(abs_err.size),
        n_categorical=int(wrong.size),
        per_feature_mae=per,
    )


def latest_observation_matrix(imputed: CompletedMatrix, ds: PanelDataset) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """One row per individual (its latest timestamp). Categoricals become
    indicator columns for codes 1..L-1; code 0 is the reference level.

    Returns (X, individual index per row, column names).
    """
    latest = np.empty(ds.n_individuals, dtype=np.int64)
    order = np.lexsort((ds.time, ds.individual))
    last_of = np.r_[ds.individual[order][1:] != ds.individual[order][:-1], True]
    latest[ds.individual[order][last_of]] = order[last_of]
    names = ds.feature_names
    blocks = [imputed.w[latest]]
    cols = list(names[: ds.p0])
    for c, card in enumerate(ds.cardinalities):
        codes = imputed.v[latest, c]
        for lv in range(1, card):
            blocks.append((codes == lv).astype(float)[:, None])
            cols.append(f"{names[ds.p0 + c]}={ds.levels[c][lv]}")
    return np.hstack(blocks), np.arange(ds.n_individuals), cols


# ---------------------------------------------------------------------------
# l1 logistic regression


@dataclass
class LogisticModel:
    weights: np.ndarray
    intercept: float
    reg: float
    n_iter: int
    converged: bool
    trace: list[float] = field(default_factory=list)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.intercept

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(X))


def smooth_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, float]:
    """Mean log-loss and its gradient in (w, b)."""
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    resid = (expit(z) - y) / y.size
    return loss, X.T @ resid, float(resid.sum())


def l1_objective(w, b, X, y, reg) -> float:
    return smooth_loss(w, b, X, y)[0] + reg * float(np.abs(w).sum())


def _soft_threshold(x: np.ndarray, t: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _check_labels(y: np.ndarray) -> None:
    if np.unique(y).size < 2:
        raise DataError("labels contain a single class")


def fit_l1_logistic(X, y, reg: float, seed: int = 0, max_iter: int = 10_000,
                    tol: float = 1e-8) -> LogisticModel:
    """Proximal gradient with backtracking on mean log-loss + reg * ||w||_1
    (intercept unpenalized), started from zero weights and the base-rate
    intercept. ``seed`` is accepted for interface symmetry; the fit is
    deterministic."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_labels(y)
    if reg < 0:
        raise ValueError("reg must be non-negative")
    base = y.mean()
    w = np.zeros(X.shape[1])
    b = float(np.log(base / (1.0 - base)))
    f, gw, gb = smooth_loss(w, b, X, y)
    obj = f + reg * float(np.abs(w).sum())
    trace = [obj]
    step = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        while True:
            w_new = _soft_threshold(w - step * gw, step * reg)
            b_new = b - step * gb
            dw, db = w_new - w, b_new - b
            f_new, gw_new, gb_new = smooth_loss(w_new, b_new, X, y)
            model = f + gw @ dw + gb * db + (dw @ dw + db * db) / (2.0 * step)
            if f_new <= model or step < 1e-12:
                break
            step *= 0.5
        obj_new = f_new + reg * float(np.abs(w_new).sum())
        if obj_new > obj:
            # only reachable through rounding at the optimum
            converged = True
            break
        change = (obj - obj_new) / max(abs(obj), 1e-300)
        w, b, f, gw, gb, obj = w_new, b_new, f_new, gw_new, gb_new, obj_new
        trace.append(obj)
        if change < tol:
            converged = True
            break
        step *= 1.5
    return LogisticModel(w, b, float(reg), it, converged, trace)


# ---------------------------------------------------------------------------
# AUC


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    _check_labels(labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _stratified_split(y: np.ndarray, test_fraction: float, rng: np.random.Generator):
    test = []
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(y == cls))
        test.extend(idx[: int(np.floor(test_fraction * idx.size + 0.5))].tolist())
    is_test = np.zeros(y.size, dtype=bool)
    is_test[test] = True
    return np.flatnonzero(~is_test), np.flatnonzero(is_test)


def _standardize_columns(train: np.ndarray, *others: np.ndarray):
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0] = 1.0
    return [(a - mu) / sd for a in (train,) + others]


def select_reg(X: np.ndarray, y: np.ndarray, seed: int, grid=REG_GRID, folds: int = 3) -> float:
    """Regularization strength with the best mean inner-fold AUC; the first
    (smallest) grid value wins ties."""
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.size, dtype=np.int64)
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(y == cls))
        fold_of[idx] = np.arange(idx.size) % folds
    best, best_score = grid[0], -np.inf
    for reg in grid:
        scores = []
        for f in range(folds):
            tr, te = fold_of != f, fold_of == f
            if np.unique(y[tr]).size < 2 or np.unique(y[te]).size < 2:
                continue
            Xtr, Xte = _standardize_columns(X[tr], X[te])
            model = fit_l1_logistic(Xtr, y[tr], reg)
            scores.append(auc(model.decision_function(Xte), y[te]))
        score = float(np.mean(scores)) if scores else -np.inf
        if score > best_score:
            best, best_score = reg, score
    return best


def downstream_auc(ds: PanelDataset, imputed: CompletedMatrix, labels, split_seed: int,
                   reg: float | None = None, test_fraction: float = 0.3) -> float:
    """Test-set AUC of an l1 logistic model on the latest observation of
    each individual; 70/30 stratified split, reg picked on the training side
    when not given."""
    labels = np.asarray(labels)
    if labels.shape != (ds.n_individuals,):
        raise DataError("need exactly one label per individual")
    X, inds, _ = latest_observation_matrix(imputed, ds)
    y = labels[inds]
    _check_labels(y)
    rng = np.random.default_rng(split_seed)
    for _ in range(10):
        tr, te = _stratified_split(y, test_fraction, rng)
        if np.unique(y[tr]).size == 2 and np.unique(y[te]).size == 2:
            break
    else:
        raise DataError("could not draw a train/test split with both classes on each side")
    if reg is None:
        reg = select_reg(X[tr], y[tr], split_seed)
    Xtr, Xte = _standardize_columns(X[tr], X[te])
    model = fit_l1_logistic(Xtr, y[tr], reg, seed=split_seed)
    return auc(model.decision_function(Xte), y[te])
