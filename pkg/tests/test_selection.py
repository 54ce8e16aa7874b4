import numpy as np
import pytest

from medimpute.errors import DataError
from medimpute.knn import Hyperparams
from medimpute.panel import SynthConfig, apply_mcar_mask, standardize, synth_panel
from medimpute.selection import HyperGrid, cross_validate, draw_folds
from medimpute.solver import SolverConfig
from tests.conftest import make_panel


def panel(seed, individuals=12, obs=5, rho=0.8, fraction=0.2, **kw):
    cfg = SynthConfig(individuals=individuals, obs_per_individual=obs, n_continuous=3, n_categorical=1,
                      rho=rho, seed=seed, outcome_sparsity=2, **kw)
    ds, _ = synth_panel(cfg)
    masked, _ = apply_mcar_mask(ds, fraction, seed)
    return standardize(masked)[0]


def solver(ds, k=3, **kw):
    kw.setdefault("n_restarts", 0)
    kw.setdefault("max_sweeps", 10)
    return SolverConfig(Hyperparams.shared(ds.p, 0.0, 1.0, k), **kw)


def test_singleton_grid():
    ds = panel(0)
    rep = cross_validate(ds, HyperGrid((0.5,), (0.7,), (3,)), 2, 0, solver(ds))
    assert rep.selected.alpha.tolist() == [0.5] * ds.p
    assert rep.selected.lam.tolist() == [0.7] * ds.p
    assert len(rep.points) == 1 and len(rep.points[0]["fold_scores"]) == 2
    assert rep.points[0]["score"] == pytest.approx(np.mean(rep.points[0]["fold_scores"]))


@pytest.mark.parametrize("folds", [2, 3, 5])
def test_folds_partition_observed_cells(folds):
    ds = panel(1)
    parts = draw_folds(ds, folds, 3)
    cells = [set(zip(r.tolist(), c.tolist())) for r, c in parts]
    observed = set(zip(*[a.tolist() for a in np.nonzero(~ds.mask)]))
    assert set().union(*cells) == observed
    assert sum(len(c) for c in cells) == len(observed)
    sizes = [len(c) for c in cells]
    assert max(sizes) - min(sizes) <= 1
    assert all(np.array_equal(a[0], b[0]) for a, b in zip(parts, draw_folds(ds, folds, 3)))


def test_fold_errors():
    ds = panel(1)
    with pytest.raises(ValueError):
        draw_folds(ds, 1, 0)
    tiny = make_panel([[1.0], [np.nan], [np.nan]])
    with pytest.raises(DataError):
        draw_folds(tiny, 2, 0)


def test_alpha_zero_scores_ignore_lambda():
    ds = panel(2)
    grid = HyperGrid((0.0, 0.5), (0.3, 0.7, 1.0), (3,))
    rep = cross_validate(ds, grid, 2, 1, solver(ds))
    zero = {p["score"] for p in rep.points if p["alpha"] == 0.0}
    assert len(zero) == 1
    best = min(p["score"] for p in rep.points)
    assert rep.points and any(p["score"] == best and p["alpha"] == rep.selected.alpha[0]
                              and p["lambda"] == rep.selected.lam[0] for p in rep.points)


def test_one_observation_per_individual_selects_alpha_zero():
    ds = panel(3, individuals=30, obs=1)
    grid = HyperGrid((0.0, 0.5, 1.0), (0.3, 0.9), (3,))
    rep = cross_validate(ds, grid, 2, 0, solver(ds))
    assert len({p["score"] for p in rep.points}) == 1
    assert np.all(rep.selected.alpha == 0.0)
    assert np.all(rep.selected.lam == 0.9)


def test_per_feature_pass():
    ds = panel(4)
    grid = HyperGrid((0.0, 0.8), (0.5,), (3,), per_feature=True)
    rep = cross_validate(ds, grid, 2, 0, solver(ds))
    assert len(rep.feature_trials) == 2 * ds.p
    shared_best = min(p["score"] for p in rep.points)
    assert min(t["score"] for t in rep.feature_trials) <= shared_best


@pytest.mark.slow
def test_strong_autocorrelation_selects_positive_alpha():
    hits = 0
    for seed in range(10):
        ds = panel(seed, individuals=15, obs=6, rho=0.9, fraction=0.3)
        rep = cross_validate(ds, HyperGrid((0.0, 0.5, 0.8), (0.5, 0.9), (3,)), 2, seed, solver(ds))
        hits += rep.selected.alpha[0] > 0
    assert hits >= 8


def test_grid_validation():
    with pytest.raises(ValueError):
        HyperGrid(alphas=())
    with pytest.raises(ValueError):
        HyperGrid(alphas=(1.5,))
    with pytest.raises(ValueError):
        HyperGrid(lambdas=(0.0,))
    g = HyperGrid.from_dict({"alphas": [0, 1], "ks": [4]})
    assert g.points()[0] == (0.0, 0.1, 4)
    assert HyperGrid.from_dict(g.to_dict()) == g
