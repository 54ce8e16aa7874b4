"""Longitudinal mixed-type panel data: schema, CSV I/O, standardization,
MCAR amputation and a synthetic panel generator.

Internally continuous features always precede categorical ones. The file
order declared in the schema is kept for output so that a load/write/load
cycle is an identity.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from medimpute.errors import DataError, NumericalError

MISSING_TOKEN = "NA"
CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise DataError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CONTINUOUS and self.levels is not None:
            raise DataError(f"feature {self.name!r}: continuous features take no levels")
        if self.levels is not None and len(set(self.levels)) != len(self.levels):
            raise DataError(f"feature {self.name!r}: duplicate levels")


@dataclass(frozen=True)
class Schema:
    """Column layout of a panel CSV.

    ``features`` is in file order. Categorical features without declared
    levels get them inferred (sorted) at load time.
    """

    id_column: str
    time_column: str
    features: tuple[FeatureSpec, ...]
    time_unit: str = "days"

    def __post_init__(self):
        names = [self.id_column, self.time_column] + [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("schema column names must be unique")
        if not self.features:
            raise DataError("schema declares no features")

    @property
    def continuous(self) -> list[FeatureSpec]:
        return [f for f in self.features if f.kind == CONTINUOUS]

    @property
    def categorical(self) -> list[FeatureSpec]:
        return [f for f in self.features if f.kind == CATEGORICAL]

    @property
    def internal_order(self) -> list[FeatureSpec]:
        return self.continuous + self.categorical

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "Schema":
        try:
            feats = tuple(
                FeatureSpec(
                    name=str(f["name"]),
                    kind=str(f["kind"]),
                    levels=tuple(str(v) for v in f["levels"]) if f.get("levels") is not None else None,
                )
                for f in obj["features"]
            )
            return cls(
                id_column=str(obj["id"]),
                time_column=str(obj["time"]),
                features=feats,
                time_unit=str(obj.get("time_unit", "days")),
            )
        except KeyError as exc:
            raise DataError(f"schema missing key {exc.args[0]!r}") from None

    def to_dict(self) -> dict[str, Any]:
        feats = []
        for f in self.features:
            entry: dict[str, Any] = {"name": f.name, "kind": f.kind}
            if f.levels is not None:
                entry["levels"] = list(f.levels)
            feats.append(entry)
        return {"id": self.id_column, "time": self.time_column,
                "time_unit": self.time_unit, "features": feats}


def load_schema(path: str | Path) -> Schema:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"schema {path}: invalid JSON ({exc})") from None
    return Schema.from_dict(obj)


def save_schema(schema: Schema, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n")


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """n observations of p features, each tagged with an individual and a time.

    ``individual`` holds contiguous 0-based indices; ``id_labels[m]`` is the
    original id token of individual m. Missing continuous cells hold NaN and
    missing categorical cells hold the column cardinality; neither is meant
    to be read, use the ``observed_*`` accessors.
    """

    continuous: np.ndarray
    categorical: np.ndarray
    individual: np.ndarray
    time: np.ndarray
    mask: np.ndarray
    schema: Schema
    id_labels: tuple[str, ...]

    def __post_init__(self):
        n = self.time.shape[0]
        p0, p1 = len(self.schema.continuous), len(self.schema.categorical)
        if self.continuous.shape != (n, p0) or self.categorical.shape != (n, p1):
            raise DataError("value blocks do not match the schema")
        if self.mask.shape != (n, p0 + p1) or self.individual.shape != (n,):
            raise DataError("mask/id shapes do not match row count")
        if n and (self.individual.min() < 0 or self.individual.max() >= len(self.id_labels)):
            raise DataError("individual index out of range")
        if n and len(np.unique(self.individual)) != len(self.id_labels):
            raise DataError("every individual must have at least one row")
        card = self.cardinalities
        cat_obs = ~self.mask[:, p0:]
        if np.any(cat_obs & ((self.categorical < 0) | (self.categorical >= card))):
            raise DataError("categorical code outside declared level set")
        # Re-apply sentinels so callers can never observe stale payloads.
        cont = np.where(self.mask[:, :p0], np.nan, self.continuous).astype(float)
        cat = np.where(cat_obs, self.categorical, card).astype(np.int64)
        for name, arr in (("continuous", cont), ("categorical", cat),
                          ("individual", self.individual.astype(np.int64)),
                          ("time", self.time.astype(float)), ("mask", self.mask.astype(bool))):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # shape ------------------------------------------------------------
    @property
    def n_rows(self) -> int:
        return int(self.time.shape[0])

    @property
    def n_individuals(self) -> int:
        return len(self.id_labels)

    @property
    def p0(self) -> int:
        return int(self.continuous.shape[1])

    @property
    def p1(self) -> int:
        return int(self.categorical.shape[1])

    @property
    def p(self) -> int:
        return self.p0 + self.p1

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.schema.internal_order]

    @property
    def feature_kinds(self) -> list[str]:
        return [f.kind for f in self.schema.internal_order]

    @property
    def levels(self) -> list[tuple[str, ...]]:
        return [f.levels for f in self.schema.categorical]

    @property
    def cardinalities(self) -> np.ndarray:
        return np.array([len(lv) for lv in self.levels], dtype=np.int64)

    # masked accessors --------------------------------------------------
    def observed_continuous(self, d: int) -> np.ndarray:
        return self.continuous[~self.mask[:, d], d]

    def observed_categorical(self, c: int) -> np.ndarray:
        return self.categorical[~self.mask[:, self.p0 + c], c]

    @property
    def n_missing(self) -> int:
        return int(self.mask.sum())

    @property
    def incomplete_rows(self) -> np.ndarray:
        return np.flatnonzero(self.mask.any(axis=1))

    def with_values(self, continuous=None, categorical=None, mask=None) -> "PanelDataset":
        return replace(
            self,
            continuous=self.continuous if continuous is None else continuous,
            categorical=self.categorical if categorical is None else categorical,
            mask=self.mask if mask is None else mask,
        )

    def subset_rows(self, rows: Sequence[int]) -> "PanelDataset":
        """Rows in the given order; individuals re-indexed by first appearance
        order of their old index (so relative order is preserved)."""
        rows = np.asarray(rows, dtype=np.int64)
        old = self.individual[rows]
        kept = np.unique(old)
        remap = np.full(self.n_individuals, -1, dtype=np.int64)
        remap[kept] = np.arange(kept.size)
        return PanelDataset(
            continuous=self.continuous[rows],
            categorical=self.categorical[rows],
            individual=remap[old],
            time=self.time[rows],
            mask=self.mask[rows],
            schema=self.schema,
            id_labels=tuple(self.id_labels[m] for m in kept),
        )

    def equals(self, other: "PanelDataset") -> bool:
        """Identity on everything a consumer may read."""
        return (
            self.schema == other.schema
            and self.id_labels == other.id_labels
            and np.array_equal(self.individual, other.individual)
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.continuous, other.continuous, equal_nan=True)
            and np.array_equal(self.categorical, other.categorical)
        )


# ---------------------------------------------------------------------------
# CSV ingestion / emission


def _id_sort_key(labels: Sequence[str]):
    try:
        ints = [int(s) for s in labels]
    except ValueError:
        return {s: (1, s) for s in labels}
    return {s: (0, v) for s, v in zip(labels, ints)}


def _parse_float(token: str, what: str, row: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataError(f"row {row}: non-numeric {what} value {token!r}") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}: non-finite {what} value {token!r}")
    return value


def load_csv(path: str | Path, schema: Schema) -> PanelDataset:
    """Read a panel CSV. Rows come back sorted by (individual id, time);
    row numbers in error messages are 1-based data rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        records = [r for r in reader if r and any(tok.strip() for tok in r)]
    if not records:
        raise DataError(f"{path}: no observations")

    col = {name: i for i, name in enumerate(header)}
    for name in [schema.id_column, schema.time_column] + [f.name for f in schema.features]:
        if name not in col:
            raise DataError(f"schema column {name!r} not found in CSV header")

    cont_specs = schema.continuous
    cat_specs = schema.categorical
    # infer undeclared categorical levels
    resolved = {}
    for f in cat_specs:
        if f.levels is None:
            seen = sorted({r[col[f.name]].strip() for r in records} - {MISSING_TOKEN})
            resolved[f.name] = FeatureSpec(f.name, CATEGORICAL, tuple(seen))
    if resolved:
        schema = replace(schema, features=tuple(resolved.get(f.name, f) for f in schema.features))
        cat_specs = schema.categorical

    n, p0, p1 = len(records), len(cont_specs), len(cat_specs)
    ids: list[str] = []
    times = np.empty(n)
    cont = np.full((n, p0), np.nan)
    cat = np.zeros((n, p1), dtype=np.int64)
    mask = np.zeros((n, p0 + p1), dtype=bool)
    level_index = [{lv: k for k, lv in enumerate(f.levels)} for f in cat_specs]

    for r, rec in enumerate(records):
        row = r + 1
        if len(rec) != len(header):
            raise DataError(f"row {row}: expected {len(header)} fields, got {len(rec)}")
        tok = rec[col[schema.id_column]].strip()
        if tok in ("", MISSING_TOKEN):
            raise DataError(f"row {row}: missing individual id")
        ids.append(tok)
        t = _parse_float(rec[col[schema.time_column]].strip(), "time", row)
        if t < 0:
            raise DataError(f"row {row}: negative time {t}")
        times[r] = t
        for d, f in enumerate(cont_specs):
            tok = rec[col[f.name]].strip()
            if tok == MISSING_TOKEN:
                mask[r, d] = True
            else:
                cont[r, d] = _parse_float(tok, f"continuous {f.name!r}", row)
        for c, f in enumerate(cat_specs):
            tok = rec[col[f.name]].strip()
            if tok == MISSING_TOKEN:
                mask[r, p0 + c] = True
            elif tok in level_index[c]:
                cat[r, c] = level_index[c][tok]
            else:
                raise DataError(f"row {row}: value {tok!r} not a declared level of {f.name!r}")

    seen: dict[tuple[str, float], int] = {}
    for r, key in enumerate(zip(ids, times.tolist())):
        if key in seen:
            raise DataError(
                f"row {r + 1}: duplicate (id, time) pair {key} (first at row {seen[key] + 1})"
            )
        seen[key] = r

    labels = sorted(set(ids), key=_id_sort_key(list(set(ids))).__getitem__)
    index_of = {lab: m for m, lab in enumerate(labels)}
    individual = np.array([index_of[s] for s in ids], dtype=np.int64)
    order = np.lexsort((times, individual))
    return PanelDataset(
        continuous=cont[order],
        categorical=cat[order],
        individual=individual[order],
        time=times[order],
        mask=mask[order],
        schema=schema,
        id_labels=tuple(labels),
    )


def format_number(x: float) -> str:
    """Shortest round-trip decimal; integral values drop the trailing '.0'."""
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def _file_columns(ds: PanelDataset) -> list[tuple[str, int]]:
    """(kind, internal column index) for each feature in schema file order."""
    pos = {f.name: i for i, f in enumerate(ds.schema.internal_order)}
    return [(f.kind, pos[f.name]) for f in ds.schema.features]


def write_csv(
    ds: PanelDataset,
    path: str | Path,
    continuous: np.ndarray | None = None,
    categorical: np.ndarray | None = None,
) -> None:
    """Write ``ds`` in schema file order. If value blocks are supplied every
    cell is written from them (filled output); otherwise missing cells are NA."""
    filled = continuous is not None
    cont = ds.continuous if continuous is None else continuous
    cat = ds.categorical if categorical is None else categorical
    levels = ds.levels
    columns = _file_columns(ds)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([ds.schema.id_column, ds.schema.time_column] + [f.name for f in ds.schema.features])
        for r in range(ds.n_rows):
            out = [ds.id_labels[ds.individual[r]], format_number(ds.time[r])]
            for kind, d in columns:
                if not filled and ds.mask[r, d]:
                    out.append(MISSING_TOKEN)
                elif kind == CONTINUOUS:
                    out.append(format_number(cont[r, d]))
                else:
                    out.append(levels[d - ds.p0][int(cat[r, d - ds.p0])])
            w.writerow(out)


def write_mask_csv(ds: PanelDataset, path: str | Path, flags: np.ndarray) -> None:
    """0/1 flags per cell (internal column order in ``flags``), file order on disk."""
    columns = _file_columns(ds)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([ds.schema.id_column, ds.schema.time_column] + [f.name for f in ds.schema.features])
        for r in range(ds.n_rows):
            w.writerow([ds.id_labels[ds.individual[r]], format_number(ds.time[r])]
                       + [str(int(bool(flags[r, d]))) for _, d in columns])


# ---------------------------------------------------------------------------
# Standardization


@dataclass(frozen=True, eq=False)
class StandardizationParams:
    mean: np.ndarray
    sd: np.ndarray

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.sd

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return values * self.sd + self.mean


def standardize(ds: PanelDataset) -> tuple[PanelDataset, StandardizationParams]:
    """z-score each continuous column using observed entries only (sample sd).
    Columns with fewer than two distinct observed values keep sd = 1."""
    mean = np.zeros(ds.p0)
    sd = np.ones(ds.p0)
    names = ds.feature_names
    with np.errstate(over="ignore", invalid="ignore"):
        for d in range(ds.p0):
            vals = ds.observed_continuous(d)
            if vals.size:
                mean[d] = vals.mean()
            if vals.size > 1:
                s = vals.std(ddof=1)
                if s > 0:
                    sd[d] = s
            if not (np.isfinite(mean[d]) and np.isfinite(sd[d])):
                raise NumericalError(f"column {names[d]!r} overflows during standardization")
    params = StandardizationParams(mean, sd)
    return ds.with_values(continuous=params.transform(ds.continuous)), params


def unstandardize(ds: PanelDataset, params: StandardizationParams) -> PanelDataset:
    return ds.with_values(continuous=params.inverse(ds.continuous))


# ---------------------------------------------------------------------------
# MCAR amputation


@dataclass(frozen=True, eq=False)
class MaskRecord:
    """Cells hidden by amputation, sorted row-major; values are the hidden
    truths (category codes for categorical columns)."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    p0: int
    fraction: float
    seed: int
    mechanism: str = "mcar"

    def __len__(self) -> int:
        return int(self.rows.size)

    @property
    def is_continuous(self) -> np.ndarray:
        return self.cols < self.p0

    @property
    def n_continuous(self) -> int:
        return int(self.is_continuous.sum())

    @property
    def n_categorical(self) -> int:
        return len(self) - self.n_continuous


def mask_count(fraction: float, n_observed: int) -> int:
    """Round-half-up of fraction * n_observed."""
    return int(math.floor(fraction * n_observed + 0.5))


def apply_mcar_mask(ds: PanelDataset, fraction: float, seed: int) -> tuple[PanelDataset, MaskRecord]:
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    obs_rows, obs_cols = np.nonzero(~ds.mask)
    if obs_rows.size == 0:
        raise DataError("dataset has no observed cells to mask")
    count = mask_count(fraction, obs_rows.size)
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(obs_rows.size, size=count, replace=False))
    rows, cols = obs_rows[pick], obs_cols[pick]
    values = np.empty(count)
    is_cont = cols < ds.p0
    values[is_cont] = ds.continuous[rows[is_cont], cols[is_cont]]
    values[~is_cont] = ds.categorical[rows[~is_cont], cols[~is_cont] - ds.p0]
    mask = ds.mask.copy()
    mask[rows, cols] = True
    record = MaskRecord(rows=rows, cols=cols, values=values, p0=ds.p0,
                        fraction=float(fraction), seed=int(seed))
    return ds.with_values(mask=mask), record


def keep_most_recent(ds: PanelDataset, k: int) -> tuple[PanelDataset, np.ndarray, int]:
    """Keep each individual's k latest rows. Individuals with fewer than k rows
    are dropped. Returns (dataset, kept old individual indices, dropped count)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    keep: list[int] = []
    kept_ind: list[int] = []
    dropped = 0
    for m in range(ds.n_individuals):
        rows = np.flatnonzero(ds.individual == m)
        if rows.size < k:
            dropped += 1
            continue
        rows = rows[np.argsort(ds.time[rows], kind="stable")][-k:]
        keep.extend(rows.tolist())
        kept_ind.append(m)
    if not keep:
        raise DataError(f"no individual has {k} or more observations")
    return ds.subset_rows(keep), np.array(kept_ind, dtype=np.int64), dropped


# ---------------------------------------------------------------------------
# Synthetic panels


@dataclass
class SynthConfig:
    """Generator settings. Continuous features share a low-rank individual
    level plus an AR(1) deviation; categoricals are sticky Markov chains whose
    stationary law depends on the same latent factors."""

    individuals: int = 150
    obs_per_individual: int = 10
    n_continuous: int = 9
    n_categorical: int = 4
    rho: float = 0.8
    time_step: float = 2.0
    outcome_sparsity: int = 4
    seed: int = 0
    n_levels: int = 3
    n_factors: int = 2
    categorical_persistence: float = 0.8
    deviation_sd: float = 0.7
    time_unit: str = "years"
    outcome_intercept: float = -1.0

    def __post_init__(self):
        if self.individuals < 1 or self.obs_per_individual < 1:
            raise ValueError("individuals and obs_per_individual must be positive")
        if self.n_continuous < 0 or self.n_categorical < 0 or self.n_continuous + self.n_categorical < 1:
            raise ValueError("need at least one feature")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.time_step <= 0:
            raise ValueError("time_step must be positive")
        if not 0 <= self.outcome_sparsity <= self.n_continuous:
            raise ValueError("outcome_sparsity must lie in [0, n_continuous]")
        if self.n_levels < 2 or self.n_factors < 1:
            raise ValueError("n_levels >= 2 and n_factors >= 1 required")
        if not 0.0 <= self.categorical_persistence < 1.0:
            raise ValueError("categorical_persistence must lie in [0, 1)")

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "SynthConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown generator keys: {sorted(unknown)}")
        return cls(**obj)

    def schema(self) -> Schema:
        feats = [FeatureSpec(f"cont_{d + 1}", CONTINUOUS) for d in range(self.n_continuous)]
        levels = tuple(f"L{k}" for k in range(self.n_levels))
        feats += [FeatureSpec(f"cat_{c + 1}", CATEGORICAL, levels) for c in range(self.n_categorical)]
        return Schema("id", "time", tuple(feats), self.time_unit)


def synth_panel(cfg: SynthConfig) -> tuple[PanelDataset, np.ndarray]:
    """Fully observed synthetic panel and one binary outcome per individual."""
    rng = np.random.default_rng(cfg.seed)
    M, T, p0, p1, r = cfg.individuals, cfg.obs_per_individual, cfg.n_continuous, cfg.n_categorical, cfg.n_factors

    load = rng.normal(size=(p0, r))
    load /= np.maximum(np.linalg.norm(load, axis=1, keepdims=True), 1e-12)
    offset = rng.uniform(20.0, 120.0, size=p0)
    scale = rng.uniform(2.0, 20.0, size=p0)
    cat_load = rng.normal(scale=1.5, size=(p1, cfg.n_levels, r))

    factors = rng.normal(size=(M, r))
    level = 0.8 * factors @ load.T + 0.6 * rng.normal(size=(M, p0))

    def shock() -> np.ndarray:
        common = rng.normal(size=(M, r)) @ load.T
        return cfg.deviation_sd * (0.5 * common + math.sqrt(0.75) * rng.normal(size=(M, p0)))

    innov = math.sqrt(1.0 - cfg.rho ** 2)
    dev = np.empty((M, T, p0))
    dev[:, 0] = shock()
    for t in range(1, T):
        dev[:, t] = cfg.rho * dev[:, t - 1] + innov * shock()
    latent = level[:, None, :] + dev

    logits = np.einsum("clr,mr->mcl", cat_load, factors)
    probs = np.exp(logits - logits.max(axis=2, keepdims=True))
    probs /= probs.sum(axis=2, keepdims=True)
    cum = np.cumsum(probs, axis=2)
    cats = np.empty((M, T, p1), dtype=np.int64)

    def draw() -> np.ndarray:
        u = rng.random(size=(M, p1, 1))
        return np.minimum((u > cum).sum(axis=2), cfg.n_levels - 1)

    cats[:, 0] = draw()
    for t in range(1, T):
        stay = rng.random(size=(M, p1)) < cfg.categorical_persistence
        cats[:, t] = np.where(stay, cats[:, t - 1], draw())

    active = rng.choice(p0, size=cfg.outcome_sparsity, replace=False) if p0 else np.array([], int)
    beta = rng.choice([-1.0, 1.0], size=active.size) * rng.uniform(1.0, 2.0, size=active.size)
    z_final = latent[:, -1, :] / math.sqrt(1.0 + cfg.deviation_sd ** 2)
    eta = cfg.outcome_intercept + z_final[:, active] @ beta
    labels = (rng.random(M) < 1.0 / (1.0 + np.exp(-eta))).astype(np.int64)

    cont = (offset + scale * latent).reshape(M * T, p0)
    schema = cfg.schema()
    return (
        PanelDataset(
            continuous=cont,
            categorical=cats.reshape(M * T, p1),
            individual=np.repeat(np.arange(M), T),
            time=np.tile(np.arange(T) * float(cfg.time_step), M),
            mask=np.zeros((M * T, p0 + p1), dtype=bool),
            schema=schema,
            id_labels=tuple(str(m + 1) for m in range(M)),
        ),
        labels,
    )


def write_labels_csv(ds: PanelDataset, labels: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([ds.schema.id_column, "label"])
        for m, lab in enumerate(ds.id_labels):
            w.writerow([lab, int(labels[m])])


def load_labels_csv(ds: PanelDataset, path: str | Path) -> np.ndarray:
    """Labels aligned with ``ds`` individuals; every individual needs one."""
    by_id: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for row_no, rec in enumerate(reader, start=1):
            if not rec:
                continue
            try:
                by_id[rec[0].strip()] = int(rec[1])
            except (IndexError, ValueError):
                raise DataError(f"labels row {row_no}: expected '<id>,<0|1>'") from None
    try:
        return np.array([by_id[lab] for lab in ds.id_labels], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"no label for individual {exc.args[0]!r}") from None
