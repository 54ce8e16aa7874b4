import numpy as np
import pytest

from medimpute.errors import DataError
from medimpute.knn import Hyperparams, assign_neighbors, build_decay_table, objective_value
from medimpute.panel import SynthConfig, apply_mcar_mask, standardize, synth_panel
from medimpute.solver import (
    FALLBACK_FILL,
    IMPUTED,
    OBSERVED,
    SolverConfig,
    impute,
    mean_impute,
    med_impute,
    opt_impute,
    warm_start,
)
from tests.conftest import make_panel

nan = np.nan


def small_panel(seed, n_ind=5, obs=4, fraction=0.3, p0=3, p1=2, rho=0.8):
    cfg = SynthConfig(individuals=n_ind, obs_per_individual=obs, n_continuous=p0,
                      n_categorical=p1, rho=rho, seed=seed, outcome_sparsity=min(p0, 2))
    ds, _ = synth_panel(cfg)
    std, _ = standardize(ds)
    masked, _ = apply_mcar_mask(std, fraction, seed)
    return masked


def cfg_for(ds, alpha=0.5, lam=0.5, k=3, **kw):
    return SolverConfig(Hyperparams.shared(ds.p, alpha, lam, k), **kw)


def same_result(a, b):
    return (a.objective == b.objective and np.array_equal(a.completed.w, b.completed.w)
            and np.array_equal(a.completed.v, b.completed.v)
            and np.array_equal(a.provenance, b.provenance) and a.traces == b.traces)


# --- warm start --------------------------------------------------------------

def test_warm_start_mean_fill():
    ds = make_panel([[2.0], [4.0], [nan]])
    assert warm_start(ds, 0, 0).w[2, 0] == 3.0


def test_warm_start_mode_fill():
    ds = make_panel([[0.0]] * 4, cat=[[0], [0], [1], [-1]], n_levels=2)
    assert warm_start(ds, 0, 0).v[3, 0] == 0


def test_restarts_differ_and_reproduce():
    ds = small_panel(0)
    a1, a2 = warm_start(ds, 1, 7), warm_start(ds, 2, 7)
    assert not np.array_equal(a1.w, a2.w)
    b1 = warm_start(ds, 1, 7)
    assert np.array_equal(a1.w, b1.w) and np.array_equal(a1.v, b1.v)
    # observed cells untouched
    obs = ~ds.mask[:, : ds.p0]
    assert np.array_equal(a1.w[obs], ds.continuous[obs])


def test_unimputable_column():
    ds = make_panel([[1.0, nan], [2.0, nan], [3.0, nan]])
    with pytest.raises(DataError, match="unimputable column"):
        warm_start(ds, 0, 0)
    with pytest.raises(DataError, match="unimputable column"):
        mean_impute(ds)
    with pytest.raises(DataError, match="unimputable column"):
        med_impute(ds, cfg_for(ds, k=1))


# --- med_impute ----------------------------------------------------------------

def test_zero_missing_returns_input():
    ds = make_panel([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    res = med_impute(ds, cfg_for(ds, k=1))
    assert res.objective == 0.0
    assert np.array_equal(res.completed.w, ds.continuous)
    assert np.all(res.provenance == OBSERVED)


def test_two_nn_mean_on_five_rows():
    # row 0 misses x1; by x0 its two nearest rows are 1 (x0=0.1) and 2 (x0=-0.2),
    # whose x1 values average to (4 + 6) / 2 = 5
    w = [[0.0, nan], [0.1, 4.0], [-0.2, 6.0], [3.0, 0.0], [-4.0, 1.0]]
    ds = make_panel(w, ids=[1, 2, 3, 4, 5])
    res = med_impute(ds, cfg_for(ds, alpha=0.0, k=2, n_restarts=0))
    assert res.completed.w[0, 1] == 5.0
    assert res.provenance[0, 1] == IMPUTED
    # converged after one sweep; the second confirms no further change
    assert res.sweeps_used[0] <= 2
    assert res.traces[0][-1] == res.traces[0][1]


def test_trace_monotone_on_20_rows():
    ds = small_panel(3, n_ind=5, obs=4, fraction=0.3)
    res = med_impute(ds, cfg_for(ds, k=3, n_restarts=3))
    for trace in res.traces:
        assert all(b <= a for a, b in zip(trace, trace[1:]))
        assert trace[-1] <= trace[0]


@pytest.mark.parametrize("seed", range(6))
def test_solver_invariants(seed):
    ds = small_panel(seed, n_ind=6, obs=5, fraction=0.1 + 0.08 * seed)
    cfg = cfg_for(ds, alpha=0.6, lam=0.7, k=3, n_restarts=2, seed=seed)
    res = med_impute(ds, cfg)
    cm = res.completed
    # known cells preserved
    obs = ~ds.mask
    assert np.array_equal(cm.w[obs[:, : ds.p0]], ds.continuous[obs[:, : ds.p0]])
    assert np.array_equal(cm.v[obs[:, ds.p0:]], ds.categorical[obs[:, ds.p0:]])
    # restart dominance
    assert res.objective == min(res.restart_objectives)
    assert res.restart_index == res.restart_objectives.index(res.objective)
    # reported objective is the objective of the returned matrix
    hp = res.hyperparams
    na = assign_neighbors(cm, ds.incomplete_rows, hp.k)
    assert res.objective == pytest.approx(objective_value(cm, na, hp, build_decay_table(ds, hp)), rel=1e-9)
    # monotone traces
    for trace in res.traces:
        assert np.all(np.diff(trace) <= 0)
    # determinism
    assert same_result(res, med_impute(ds, cfg))


def test_alpha_zero_equals_opt_and_lambda_is_inert():
    ds = small_panel(4)
    a = med_impute(ds, cfg_for(ds, alpha=0.0, lam=0.3, n_restarts=1))
    b = opt_impute(ds, cfg_for(ds, alpha=0.7, lam=0.9, n_restarts=1))
    assert same_result(a, b)


def test_one_row_per_individual_med_equals_opt():
    ds = small_panel(5, n_ind=15, obs=1, fraction=0.3)
    a = med_impute(ds, cfg_for(ds, alpha=0.9, lam=0.2, n_restarts=1))
    b = opt_impute(ds, cfg_for(ds, n_restarts=1))
    assert same_result(a, b)


def test_fallback_provenance():
    # alpha = 1 with a decay partner that is itself missing the feature: a cell
    # whose only weight is zero is filled from the column mean
    w = [[0.0, nan], [1.0, 2.0], [2.0, 4.0], [3.0, nan]]
    ds = make_panel(w, ids=[1, 2, 3, 4])
    hp = Hyperparams([0.0, 1.0], [0.5, 0.5], 1)
    # no individual has two rows, so alpha is dropped and every cell is solvable
    res = med_impute(ds, SolverConfig(hp, n_restarts=0))
    assert np.all(res.provenance[ds.mask] == IMPUTED)
    ds2 = make_panel(w, ids=[1, 1, 3, 4], times=[0, 1, 0, 0])
    res2 = med_impute(ds2, SolverConfig(hp, n_restarts=0))
    assert res2.provenance[3, 1] == FALLBACK_FILL
    assert res2.completed.w[3, 1] == 3.0  # observed mean of 2 and 4


# --- baselines -------------------------------------------------------------------

def test_mean_impute_examples():
    ds = make_panel([[1.0], [3.0], [nan]])
    assert mean_impute(ds).completed.w[2, 0] == 2.0
    ds = make_panel([[0.0]] * 4, cat=[[1], [1], [2], [-1]], n_levels=3)
    assert mean_impute(ds).completed.v[3, 0] == 1
    ds = make_panel([[0.0]] * 5, cat=[[2], [1], [2], [1], [0]], n_levels=3,
                    mask=[[False, False]] * 4 + [[False, True]])
    assert mean_impute(ds).completed.v[3, 0] == 1  # tie between 1 and 2


def test_mean_impute_standardized_is_zero():
    ds, _ = standardize(small_panel(1))
    res = mean_impute(ds)
    miss = ds.mask[:, : ds.p0]
    assert np.allclose(res.completed.w[miss], 0.0, atol=1e-12)
    assert np.isnan(res.objective)


def test_impute_dispatch():
    ds = small_panel(2)
    cfg = cfg_for(ds, n_restarts=0)
    assert same_result(impute(ds, "med", cfg), med_impute(ds, cfg))
    assert same_result(impute(ds, "opt_impute", cfg), opt_impute(ds, cfg))
    assert np.array_equal(impute(ds, "mean").completed.w, mean_impute(ds).completed.w)
    with pytest.raises(ValueError):
        impute(ds, "knn", cfg)
    with pytest.raises(ValueError):
        impute(ds, "med")


def test_config_validation():
    hp = Hyperparams.shared(1, 0.5, 0.5, 1)
    for kw in ({"max_sweeps": 0}, {"rel_tolerance": 0.0}, {"n_restarts": -1}):
        with pytest.raises(ValueError):
            SolverConfig(hp, **kw)
