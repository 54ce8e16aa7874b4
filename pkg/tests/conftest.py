import numpy as np
import pytest

from medimpute.panel import CATEGORICAL, CONTINUOUS, FeatureSpec, PanelDataset, Schema


def make_panel(cont, cat=None, ids=None, times=None, n_levels=None, mask=None):
    """Small PanelDataset from raw arrays; NaN in ``cont`` / -1 in ``cat`` mark missing."""
    cont = np.asarray(cont, dtype=float).reshape(len(cont), -1) if len(cont) else np.zeros((0, 0))
    n = cont.shape[0]
    cat = np.zeros((n, 0), dtype=np.int64) if cat is None else np.asarray(cat, dtype=np.int64).reshape(n, -1)
    p0, p1 = cont.shape[1], cat.shape[1]
    if n_levels is None:
        n_levels = [max(int(cat[:, c].max()) + 1, 2) for c in range(p1)]
    elif np.isscalar(n_levels):
        n_levels = [int(n_levels)] * p1
    ids = np.arange(n) if ids is None else np.asarray(ids)
    times = np.zeros(n) if times is None else np.asarray(times, dtype=float)
    if mask is None:
        mask = np.hstack([np.isnan(cont), cat < 0])
    feats = [FeatureSpec(f"x{d}", CONTINUOUS) for d in range(p0)]
    feats += [FeatureSpec(f"c{c}", CATEGORICAL, tuple(f"v{k}" for k in range(n_levels[c]))) for c in range(p1)]
    labels = sorted(set(ids.tolist()))
    index = {lab: m for m, lab in enumerate(labels)}
    return PanelDataset(
        continuous=np.nan_to_num(cont),
        categorical=np.where(cat < 0, 0, cat),
        individual=np.array([index[i] for i in ids.tolist()], dtype=np.int64),
        time=times,
        mask=np.asarray(mask, dtype=bool),
        schema=Schema("id", "t", tuple(feats)),
        id_labels=tuple(str(x) for x in labels),
    )


@pytest.fixture
def panel_factory():
    return make_panel


# one verdict line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
