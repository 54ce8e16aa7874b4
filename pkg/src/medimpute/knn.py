"""Distance, neighbor assignment, exact cell updates and objective evaluation
for the time-decayed K-NN imputation objective.

Objective, summed over incomplete rows i and features d:

    sum_j z_ij (1 - a_d) dist_d(i, j)  +  sum_j a_d C_ijd dist_d(i, j)

with dist_d the squared difference (continuous) or mismatch indicator
(categorical) and C_ijd = lam_d ** |t_i - t_j| for rows of the same
individual, 0 otherwise.

Every objective evaluation and every accept/reject decision in a cell update
goes through a correctly rounded sum (a port of ``math.fsum``). The rounded
total is then a monotone function of the exact total, which is what lets the
solver guarantee a non-increasing objective trace bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from medimpute.panel import PanelDataset

FALLBACK = -1


@dataclass(frozen=True, eq=False)
class Hyperparams:
    alpha: np.ndarray
    lam: np.ndarray
    k: int

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if alpha.shape != lam.shape:
            raise ValueError("alpha and lambda must have the same length")
        if np.any((alpha < 0) | (alpha > 1)):
            raise ValueError("alpha must lie in [0, 1]")
        if np.any((lam <= 0) | (lam > 1)):
            raise ValueError("lambda must lie in (0, 1]")
        if int(self.k) < 1:
            raise ValueError("k must be positive")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "k", int(self.k))

    @classmethod
    def shared(cls, p: int, alpha: float, lam: float, k: int) -> "Hyperparams":
        return cls(np.full(p, float(alpha)), np.full(p, float(lam)), k)

    def check(self, ds: PanelDataset) -> None:
        if self.alpha.size != ds.p:
            raise ValueError(f"expected {ds.p} alpha/lambda entries, got {self.alpha.size}")
        if self.k >= ds.n_rows:
            raise ValueError(f"k={self.k} must be smaller than the row count {ds.n_rows}")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.tolist(), "lambda": self.lam.tolist(), "k": self.k}


@dataclass(frozen=True, eq=False)
class DecayTable:
    """Same-individual pairs in CSR form: partners of row i are
    ``partner[indptr[i]:indptr[i+1]]`` with per-feature coefficients in the
    matching rows of ``coef``. Cross-individual pairs are absent (zero)."""

    indptr: np.ndarray
    partner: np.ndarray
    coef: np.ndarray
    individual: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.partner.size)

    def coefficient(self, i: int, j: int, d: int) -> float:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        hits = np.flatnonzero(self.partner[lo:hi] == j)
        return float(self.coef[lo + hits[0], d]) if hits.size else 0.0


@dataclass(frozen=True, eq=False)
class NeighborAssignment:
    rows: np.ndarray
    neighbors: np.ndarray

    @property
    def k(self) -> int:
        return int(self.neighbors.shape[1])

    def position(self, n_rows: int) -> np.ndarray:
        """Map row -> index into ``rows`` (or -1 if the row is complete)."""
        pos = np.full(n_rows, -1, dtype=np.int64)
        pos[self.rows] = np.arange(self.rows.size)
        return pos

    def reverse(self, n_rows: int) -> tuple[np.ndarray, np.ndarray]:
        """CSR of incomplete rows that list each row as a neighbor."""
        targets = self.neighbors.ravel()
        sources = np.repeat(self.rows, self.k)
        order = np.argsort(targets, kind="stable")
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(targets, minlength=n_rows), out=indptr[1:])
        return indptr, sources[order].astype(np.int64)


@dataclass(eq=False)
class CompletedMatrix:
    """Fully filled values; known cells equal the source data."""

    w: np.ndarray
    v: np.ndarray
    mask: np.ndarray
    n_levels: np.ndarray | None = None

    def __post_init__(self):
        if self.n_levels is None:
            self.n_levels = (self.v.max(axis=0) + 1 if self.v.shape[0]
                             else np.ones(self.v.shape[1])).astype(np.int64)

    @property
    def n_rows(self) -> int:
        return int(self.w.shape[0])

    @property
    def p0(self) -> int:
        return int(self.w.shape[1])

    def copy(self) -> "CompletedMatrix":
        return CompletedMatrix(self.w.copy(), self.v.copy(), self.mask, self.n_levels)

    @property
    def incomplete_rows(self) -> np.ndarray:
        return np.flatnonzero(self.mask.any(axis=1))


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def _fsum(x, n):
    """Correctly rounded sum of x[:n] (Shewchuk partials, CPython fsum)."""
    partials = np.empty(256)
    m = 0
    for t in range(n):
        xv = x[t]
        i = 0
        for q in range(m):
            y = partials[q]
            if abs(xv) < abs(y):
                xv, y = y, xv
            hi = xv + y
            lo = y - (hi - xv)
            if lo != 0.0:
                partials[i] = lo
                i += 1
            xv = hi
        partials[i] = xv
        m = i + 1
    if m == 0:
        return 0.0
    hi = partials[m - 1]
    lo = 0.0
    k = m - 1
    while k > 0:
        xv = hi
        y = partials[k - 1]
        k -= 1
        hi = xv + y
        yr = hi - xv
        lo = y - yr
        if lo != 0.0:
            break
    if k > 0 and ((lo < 0.0 and partials[k - 1] < 0.0) or (lo > 0.0 and partials[k - 1] > 0.0)):
        y = lo * 2.0
        xv = hi + y
        yr = xv - hi
        if y == yr:
            hi = xv
    return hi


@njit(cache=True)
def _row_distance(W, V, i, j):
    s = 0.0
    for d in range(W.shape[1]):
        diff = W[i, d] - W[j, d]
        s += diff * diff
    for d in range(V.shape[1]):
        if V[i, d] != V[j, d]:
            s += 1.0
    return s


@njit(cache=True)
def _knn(W, V, rows, k):
    n = W.shape[0]
    # column-major copies so the inner loop runs over candidate rows; each
    # row's distance is still accumulated feature by feature, in the same
    # order as _row_distance, so results are bit-identical to it
    WT = np.ascontiguousarray(W.T)
    VT = np.ascontiguousarray(V.T)
    out = np.empty((rows.size, k), np.int64)
    dist = np.empty(n)
    bd = np.empty(k)
    bi = np.empty(k, np.int64)
    for r in range(rows.size):
        i = rows[r]
        dist[:] = 0.0
        for d in range(WT.shape[0]):
            x = W[i, d]
            col = WT[d]
            for j in range(n):
                diff = x - col[j]
                dist[j] += diff * diff
        for c in range(VT.shape[0]):
            x = V[i, c]
            col = VT[c]
            for j in range(n):
                if col[j] != x:
                    dist[j] += 1.0
        filled = 0
        for j in range(n):
            if j == i:
                continue
            s = dist[j]
            if filled < k:
                pos = filled
                filled += 1
            elif s < bd[k - 1]:
                pos = k - 1
            else:
                continue
            # strict '>' keeps earlier (lower) indices ahead on ties
            while pos > 0 and bd[pos - 1] > s:
                bd[pos] = bd[pos - 1]
                bi[pos] = bi[pos - 1]
                pos -= 1
            bd[pos] = s
            bi[pos] = j
        out[r, :] = bi
    return out


@njit(cache=True)
def _row_knn_terms(W, V, i, nbr, alpha, buf):
    """First-sum terms of row i for neighbor list nbr, written into buf."""
    p0 = W.shape[1]
    m = 0
    for q in range(nbr.size):
        j = nbr[q]
        for d in range(p0):
            diff = W[i, d] - W[j, d]
            buf[m] = (1.0 - alpha[d]) * (diff * diff)
            m += 1
        for c in range(V.shape[1]):
            if V[i, c] != V[j, c]:
                buf[m] = (1.0 - alpha[p0 + c]) * 1.0
                m += 1
    return m


@njit(cache=True)
def _guard_assignment(W, V, rows, new, old, alpha):
    """Keep a row's old neighbor list when the new one would raise its exact
    weighted K-NN cost. Only bites on rounding-level near ties or when alpha
    differs across features (the assignment metric is unweighted)."""
    k = new.shape[1]
    buf = np.empty(2 * k * (W.shape[1] + V.shape[1]))
    out = new.copy()
    kept = 0
    for r in range(rows.size):
        same = True
        for q in range(k):
            if new[r, q] != old[r, q]:
                same = False
                break
        if same:
            continue
        m = _row_knn_terms(W, V, rows[r], new[r], alpha, buf)
        m0 = _row_knn_terms(W, V, rows[r], old[r], alpha, buf[m:])
        for t in range(m, m + m0):
            buf[t] = -buf[t]
        if _fsum(buf, m + m0) > 0.0:
            out[r, :] = old[r, :]
            kept += 1
    return out, kept


@njit(cache=True)
def _gather_weights(i, d, nbrs, pos, rev_ptr, rev_idx, dec_ptr, dec_idx, dec_coef,
                    alpha, wbuf, jbuf):
    """Term weights u and partner rows for the restricted objective of cell (i, d).
    One entry per objective term, duplicates kept separate."""
    m = 0
    one_minus = 1.0 - alpha[d]
    r = pos[i]
    if r >= 0:
        for q in range(nbrs.shape[1]):
            wbuf[m] = one_minus
            jbuf[m] = nbrs[r, q]
            m += 1
    for e in range(rev_ptr[i], rev_ptr[i + 1]):
        wbuf[m] = one_minus
        jbuf[m] = rev_idx[e]
        m += 1
    for e in range(dec_ptr[i], dec_ptr[i + 1]):
        j = dec_idx[e]
        ac = alpha[d] * dec_coef[e, d]
        if r >= 0:
            wbuf[m] = ac
            jbuf[m] = j
            m += 1
        if pos[j] >= 0:
            wbuf[m] = ac
            jbuf[m] = j
            m += 1
    return m


@njit(cache=True)
def _continuous_update(W, i, d, wbuf, jbuf, m, tbuf):
    """Weighted mean of partners; returns (value, status) where status is
    1 accepted, 0 rejected by the exact guard, -1 zero total weight."""
    num = 0.0
    den = 0.0
    for t in range(m):
        num += wbuf[t] * W[jbuf[t], d]
        den += wbuf[t]
    if not den > 0.0:
        return W[i, d], FALLBACK
    x_new = num / den
    if x_new == W[i, d]:
        return x_new, 0
    x_old = W[i, d]
    for t in range(m):
        a = x_new - W[jbuf[t], d]
        b = x_old - W[jbuf[t], d]
        tbuf[2 * t] = wbuf[t] * (a * a)
        tbuf[2 * t + 1] = -(wbuf[t] * (b * b))
    if _fsum(tbuf, 2 * m) <= 0.0:
        return x_new, 1
    return x_old, 0


@njit(cache=True)
def _categorical_update(V, i, c, n_levels, wbuf, jbuf, m, tbuf):
    """Weighted plurality over partner values, ties to the smallest code."""
    den = 0.0
    for t in range(m):
        den += wbuf[t]
    if not den > 0.0:
        return V[i, c], FALLBACK
    votes = np.zeros(n_levels)
    for t in range(m):
        votes[V[jbuf[t], c]] += wbuf[t]
    best = 0
    for lv in range(1, n_levels):
        if votes[lv] > votes[best]:
            best = lv
    old = V[i, c]
    if best == old:
        return best, 0
    # exact cost comparison: mismatch weight under best minus under old
    q = 0
    for t in range(m):
        vj = V[jbuf[t], c]
        if vj != best:
            tbuf[q] = wbuf[t]
            q += 1
        if vj != old:
            tbuf[q] = -wbuf[t]
            q += 1
    if _fsum(tbuf, q) <= 0.0:
        return best, 1
    return old, 0


@njit(cache=True)
def _sweep(W, V, cell_rows, cell_cols, nbrs, pos, rev_ptr, rev_idx, dec_ptr, dec_idx,
           dec_coef, alpha, n_levels, col_mean, col_mode, status):
    p0 = W.shape[1]
    cap = nbrs.shape[1]
    for i in range(W.shape[0]):
        span = (rev_ptr[i + 1] - rev_ptr[i]) + 2 * (dec_ptr[i + 1] - dec_ptr[i])
        if span > cap:
            cap = span
    cap += nbrs.shape[1]
    wbuf = np.empty(cap)
    jbuf = np.empty(cap, np.int64)
    tbuf = np.empty(2 * cap)
    for e in range(cell_rows.size):
        i = cell_rows[e]
        d = cell_cols[e]
        m = _gather_weights(i, d, nbrs, pos, rev_ptr, rev_idx, dec_ptr, dec_idx, dec_coef,
                            alpha, wbuf, jbuf)
        if d < p0:
            x, st = _continuous_update(W, i, d, wbuf, jbuf, m, tbuf)
            W[i, d] = col_mean[d] if st == FALLBACK else x
        else:
            c = d - p0
            x, st = _categorical_update(V, i, c, n_levels[c], wbuf, jbuf, m, tbuf)
            V[i, c] = col_mode[c] if st == FALLBACK else x
        status[e] = st


@njit(cache=True)
def _objective(W, V, rows, nbrs, pos, dec_ptr, dec_idx, dec_coef, alpha):
    p0 = W.shape[1]
    p = p0 + V.shape[1]
    nnz_inc = 0
    for r in range(rows.size):
        i = rows[r]
        nnz_inc += dec_ptr[i + 1] - dec_ptr[i]
    buf = np.empty(rows.size * nbrs.shape[1] * p + nnz_inc * p)
    m = 0
    for r in range(rows.size):
        m += _row_knn_terms(W, V, rows[r], nbrs[r], alpha, buf[m:])
    for r in range(rows.size):
        i = rows[r]
        for e in range(dec_ptr[i], dec_ptr[i + 1]):
            j = dec_idx[e]
            for d in range(p0):
                diff = W[i, d] - W[j, d]
                buf[m] = (alpha[d] * dec_coef[e, d]) * (diff * diff)
                m += 1
            for c in range(V.shape[1]):
                if V[i, c] != V[j, c]:
                    buf[m] = (alpha[p0 + c] * dec_coef[e, p0 + c]) * 1.0
                    m += 1
    return _fsum(buf, m)


# ---------------------------------------------------------------------------
# public operations


def build_decay_table(ds: PanelDataset, hp: Hyperparams) -> DecayTable:
    """C_ijd = lam_d ** |t_i - t_j| for distinct rows of the same individual."""
    hp.check(ds)
    if not np.all(np.isfinite(ds.time)):
        raise ValueError("timestamps must be finite")
    n = ds.n_rows
    groups = [np.flatnonzero(ds.individual == m) for m in range(ds.n_individuals)]
    counts = np.zeros(n, dtype=np.int64)
    for g in groups:
        counts[g] = g.size - 1
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    partner = np.empty(indptr[-1], dtype=np.int64)
    coef = np.empty((indptr[-1], ds.p))
    for g in groups:
        if g.size < 2:
            continue
        gap = np.abs(ds.time[g][:, None] - ds.time[g][None, :])
        for a, i in enumerate(g):
            others = np.arange(g.size) != a
            lo = indptr[i]
            partner[lo:lo + g.size - 1] = g[others]
            coef[lo:lo + g.size - 1] = hp.lam[None, :] ** gap[a, others][:, None]
    return DecayTable(indptr, partner, coef, ds.individual.copy())


def pairwise_distance(i: int, j: int, cm: CompletedMatrix) -> float:
    """Squared Euclidean over continuous columns plus categorical mismatches."""
    return float(_row_distance(cm.w, cm.v, int(i), int(j)))


def assign_neighbors(cm: CompletedMatrix, rows, k: int) -> NeighborAssignment:
    """K nearest rows (excluding self) for each row in ``rows``; distance
    ties go to the lower row index."""
    rows = np.asarray(rows, dtype=np.int64)
    if k >= cm.n_rows:
        raise ValueError(f"k={k} must be smaller than the row count {cm.n_rows}")
    return NeighborAssignment(rows, _knn(cm.w, cm.v, rows, int(k)))


class _Topology:
    """Index structures shared by cell updates for a fixed assignment."""

    def __init__(self, na: NeighborAssignment, dt: DecayTable, n_rows: int):
        self.nbrs = na.neighbors
        self.pos = na.position(n_rows)
        self.rev_ptr, self.rev_idx = na.reverse(n_rows)
        self.dec_ptr, self.dec_idx, self.dec_coef = dt.indptr, dt.partner, dt.coef

    def weights(self, i: int, d: int, alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cap = self.nbrs.shape[1] + (self.rev_ptr[i + 1] - self.rev_ptr[i]) \
            + 2 * (self.dec_ptr[i + 1] - self.dec_ptr[i])
        wbuf = np.empty(cap)
        jbuf = np.empty(cap, np.int64)
        m = _gather_weights(i, d, self.nbrs, self.pos, self.rev_ptr, self.rev_idx,
                            self.dec_ptr, self.dec_idx, self.dec_coef, alpha, wbuf, jbuf)
        return wbuf[:m], jbuf[:m]


def update_continuous_cell(i, d, na, cm, hp, dt) -> float | None:
    """Exact minimizer of the objective over the single cell w[i, d].

    Returns None when every term touching the cell has zero weight; the
    caller then substitutes the column's observed mean.
    """
    topo = _Topology(na, dt, cm.n_rows)
    wbuf, jbuf = topo.weights(int(i), int(d), hp.alpha)
    x, status = _continuous_update(cm.w, int(i), int(d), wbuf, jbuf, wbuf.size,
                                   np.empty(2 * max(wbuf.size, 1)))
    return None if status == FALLBACK else float(x)


def update_categorical_cell(i, d, na, cm, hp, dt) -> int | None:
    """Best category for cell (i, d), d indexing the full feature list.
    None signals zero total weight (caller uses the observed mode)."""
    topo = _Topology(na, dt, cm.n_rows)
    c = int(d) - cm.p0
    wbuf, jbuf = topo.weights(int(i), int(d), hp.alpha)
    x, status = _categorical_update(cm.v, int(i), c, int(cm.n_levels[c]), wbuf, jbuf, wbuf.size,
                                    np.empty(2 * max(wbuf.size, 1)))
    return None if status == FALLBACK else int(x)


def objective_value(cm: CompletedMatrix, na: NeighborAssignment, hp: Hyperparams,
                    dt: DecayTable) -> float:
    pos = na.position(cm.n_rows)
    return float(_objective(cm.w, cm.v, na.rows, na.neighbors, pos, dt.indptr,
                            dt.partner, dt.coef, hp.alpha))
