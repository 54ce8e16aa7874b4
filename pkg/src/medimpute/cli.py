"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/schema error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from medimpute.bench import ExperimentConfig, emit_report, run_benchmark
from medimpute.errors import DataError, NumericalError
from medimpute.knn import Hyperparams
from medimpute.panel import (
    CONTINUOUS,
    PanelDataset,
    SynthConfig,
    apply_mcar_mask,
    format_number,
    load_csv,
    load_schema,
    save_schema,
    standardize,
    synth_panel,
    write_csv,
    write_labels_csv,
    write_mask_csv,
)
from medimpute.selection import HyperGrid, cross_validate
from medimpute.solver import SolverConfig, impute

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _per_feature(text: str, ds: PanelDataset, name: str) -> np.ndarray:
    """A scalar, or a comma list in schema file order, mapped to internal order."""
    parts = [t for t in text.split(",") if t.strip()]
    try:
        vals = [float(t) for t in parts]
    except ValueError:
        raise UsageError(f"--{name}: expected a number or comma-separated numbers") from None
    if len(vals) == 1:
        return np.full(ds.p, vals[0])
    if len(vals) != ds.p:
        raise UsageError(f"--{name}: expected 1 or {ds.p} values, got {len(vals)}")
    by_name = {f.name: v for f, v in zip(ds.schema.features, vals)}
    return np.array([by_name[n] for n in ds.feature_names])


def _sibling(path: str, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


def cmd_impute(args) -> None:
    ds = load_csv(args.input, load_schema(args.schema))
    std, params = standardize(ds)
    try:
        hp = Hyperparams(_per_feature(args.alpha, ds, "alpha"), _per_feature(args.lam, ds, "lambda"), args.k)
        cfg = SolverConfig(hp, max_sweeps=args.max_sweeps, rel_tolerance=args.tol,
                           n_restarts=args.restarts, seed=args.seed)
        hp.check(ds)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = impute(std, args.method, cfg)
    with np.errstate(over="ignore", invalid="ignore"):
        w = params.inverse(result.completed.w)
    if not np.all(np.isfinite(w)):
        raise NumericalError("imputed values overflow on the original scale")
    w[~ds.mask[:, : ds.p0]] = ds.continuous[~ds.mask[:, : ds.p0]]
    write_csv(ds, args.output, continuous=w, categorical=result.completed.v)
    write_mask_csv(ds, args.mask_output or _sibling(args.output, "_mask.csv"), ds.mask)


def cmd_cv(args) -> None:
    ds = load_csv(args.input, load_schema(args.schema))
    std, _ = standardize(ds)
    grid = HyperGrid.from_dict(json.loads(Path(args.grid).read_text())) if args.grid else HyperGrid()
    cfg = SolverConfig(Hyperparams.shared(ds.p, 0.0, 1.0, min(grid.ks)),
                       max_sweeps=args.max_sweeps, rel_tolerance=args.tol,
                       n_restarts=args.restarts, seed=args.seed)
    report = cross_validate(std, grid, args.folds, args.seed, cfg)
    doc = report.to_dict(ds.feature_names)
    doc["grid"] = grid.to_dict()
    Path(args.output).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_mask(args) -> None:
    ds = load_csv(args.input, load_schema(args.schema))
    try:
        masked, record = apply_mcar_mask(ds, args.fraction, args.seed)
    except DataError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_csv(masked, args.output)
    names = ds.feature_names
    with open(args.truth_output, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([ds.schema.id_column, ds.schema.time_column, "feature", "value"])
        for r, c, v in zip(record.rows.tolist(), record.cols.tolist(), record.values.tolist()):
            kind = ds.feature_kinds[c]
            value = format_number(v) if kind == CONTINUOUS else ds.levels[c - ds.p0][int(v)]
            w.writerow([ds.id_labels[ds.individual[r]], format_number(ds.time[r]), names[c], value])


def cmd_synth(args) -> None:
    obj = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.seed is not None:
        obj["seed"] = args.seed
    try:
        cfg = SynthConfig.from_dict(obj)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    ds, labels = synth_panel(cfg)
    write_csv(ds, args.output)
    write_labels_csv(ds, labels, args.labels_output)
    save_schema(ds.schema, args.schema_output or _sibling(args.output, ".schema.json"))


def cmd_bench(args) -> None:
    try:
        cfg = ExperimentConfig.from_json(args.config)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad experiment config: {exc}") from None
    report = run_benchmark(cfg)
    emit_report(report, args.out_dir)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="medimpute", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("impute", help="impute a panel CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--alpha", default="0.5", help="scalar or comma list in schema feature order")
    p.add_argument("--lambda", dest="lam", default="0.5", help="scalar or comma list")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=["mean", "opt", "med"], default="med")
    p.add_argument("--output", required=True)
    p.add_argument("--mask-output", default=None, help="default: <output>_mask.csv")
    p.add_argument("--max-sweeps", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("cv", help="cross-validate alpha/lambda/k")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--grid", default=None, help="JSON {alphas, lambdas, ks, per_feature}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--max-sweeps", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("mask", help="hide a random fraction of observed cells (MCAR)")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--truth-output", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("synth", help="generate a synthetic AR(1) panel")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True)
    p.add_argument("--labels-output", required=True)
    p.add_argument("--schema-output", default=None, help="default: <output>.schema.json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="run missingness and observations-per-individual sweeps")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"medimpute: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"medimpute: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"medimpute: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"medimpute: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
