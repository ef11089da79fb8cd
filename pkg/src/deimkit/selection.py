"""Interpolation index selection.

Greedy DEIM, Q-DEIM (pivoted QR of ``U^T``), the restricted randomized
variant Q-DEIMr, partial-pivoting LU (equivalent to DEIM), plain random
subsets, exhaustive volume maximization and a 2x2 volume refinement.

Indices are zero-based throughout the Python API; the JSON form written by
:meth:`SelectionReport.to_dict` is one-based.
"""

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ._constants import EPS, MAX_BRUTE_FORCE, TIE_RTOL, rank_tol
from .exceptions import BudgetExceededError, RankDeficientError, SingularMatrixError
from .linalg import (
    IceState,
    _householder,
    as_matrix,
    ice_append,
    pick_pivot,
    qr_column_pivoted,
    smallest_singular_value,
)

__all__ = [
    "SelectionOperator",
    "QdeimrConfig",
    "SelectionReport",
    "condition_number",
    "qdeim_bound",
    "volume_bound",
    "deim_select",
    "qdeim_select",
    "qdeimr_select",
    "lu_pp_select",
    "random_select",
    "brute_force_volume_select",
    "refine_volume",
]

SAMPLINGS = ("uniform", "norm-sorted", "norm-weighted")
RESTART_POLICIES = ("continue", "restart-pivoting")


@dataclass(frozen=True)
class SelectionOperator:
    """Ordered distinct row indices of an ``n``-row matrix.

    Stands for ``S = I[:, indices]`` so that ``S^T U == U[indices]``.
    """

    indices: np.ndarray
    ambient_dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp).copy()
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        if idx.ndim != 1:
            raise ValueError("indices must be one-dimensional")
        if idx.size and (idx.min() < 0 or idx.max() >= self.ambient_dim):
            raise ValueError(f"indices out of range for n={self.ambient_dim}")
        if np.unique(idx).size != idx.size:
            raise ValueError("indices must be distinct")

    def __len__(self):
        return self.indices.size

    def __iter__(self):
        return iter(self.indices.tolist())

    def __eq__(self, other):
        if not isinstance(other, SelectionOperator):
            return NotImplemented
        return self.ambient_dim == other.ambient_dim and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.ambient_dim, tuple(self.indices.tolist())))

    def matrix(self):
        """Dense ``n x m`` selection matrix."""
        S = np.zeros((self.ambient_dim, len(self)))
        S[self.indices, np.arange(len(self))] = 1.0
        return S

    def restrict(self, X):
        """``S^T X``."""
        return np.asarray(X)[self.indices]


def condition_number(U, sel):
    """``||(S^T U)^{-1}||_2``, ``inf`` for a singular selected block."""
    idx = sel.indices if isinstance(sel, SelectionOperator) else np.asarray(sel)
    smin = smallest_singular_value(np.asarray(U, dtype=float)[idx])
    return math.inf if smin == 0.0 else 1.0 / smin


def qdeim_bound(n, m):
    """Worst-case Q-DEIM bound ``sqrt(n-m+1) * sqrt(4^m + 6m - 1) / 3``."""
    return math.sqrt(n - m + 1) * math.sqrt(4.0**m + 6 * m - 1) / 3.0


def volume_bound(n, m):
    """Bound ``sqrt(1 + m(n-m))`` met by the maximal-volume selection."""
    return math.sqrt(1 + m * (n - m))


def _forward(L, b, k):
    """Solve ``L[:k, :k] y = b`` for lower-triangular L."""
    y = np.empty(k)
    for i in range(k):
        y[i] = (b[i] - L[i, :i] @ y[:i]) / L[i, i]
    return y


def _backward(Ut, b, k):
    """Solve ``Ut[:k, :k] z = b`` for upper-triangular Ut."""
    z = np.empty(k)
    for i in range(k - 1, -1, -1):
        z[i] = (b[i] - Ut[i, i + 1 : k] @ z[i + 1 : k]) / Ut[i, i]
    return z


def deim_select(U):
    """Greedy DEIM selection.

    Step ``j`` interpolates column ``j`` at the indices picked so far and
    selects the row of largest residual magnitude. The small systems
    ``U[p, :j] z = U[p, j]`` are solved with an LU factorization that is
    extended by one row and column per step instead of being recomputed.

    Raises
    ------
    RankDeficientError
        If a residual vanishes identically.
    """
    U = as_matrix(U, "U")
    n, m = U.shape
    if m > n:
        raise RankDeficientError(f"cannot select {m} rows from n={n}")
    rows = np.arange(n)
    p = np.empty(m, dtype=np.intp)
    L = np.zeros((m, m))
    Ut = np.zeros((m, m))

    r = U[:, 0]
    p[0] = pick_pivot(np.abs(r), rows)
    if r[p[0]] == 0.0:
        raise RankDeficientError("first basis vector is zero")
    L[0, 0] = 1.0
    Ut[0, 0] = r[p[0]]
    for j in range(1, m):
        rhs = U[p[:j], j]
        y = _forward(L, rhs, j)
        z = _backward(Ut, y, j)
        r = U[:, j] - U[:, :j] @ z
        pj = pick_pivot(np.abs(r), rows)
        if r[pj] == 0.0:
            raise RankDeficientError(f"basis vector {j} depends on the previous ones")
        # extend the LU of U[p, :j] by the new row pj and column j
        Ut[:j, j] = y
        L[j, :j] = _forward(Ut.T, U[pj, :j], j)
        L[j, j] = 1.0
        Ut[j, j] = r[pj]
        p[j] = pj
    return SelectionOperator(p, n)


def qdeim_select(U, return_factor=False):
    """Q-DEIM: the first ``m`` pivots of a column pivoted QR of ``U^T``.

    Parameters
    ----------
    U : array_like, shape (n, m)
        Full column rank; orthonormality is not required.
    return_factor : bool
        Also return the :class:`~deimkit.linalg.PivotedQrFactor` of ``U^T``.

    Raises
    ------
    RankDeficientError
        If ``|T_mm| < n * eps * |T_11|``.
    """
    U = as_matrix(U, "U")
    n, m = U.shape
    if m > n:
        raise RankDeficientError(f"cannot select {m} rows from n={n}")
    qr = qr_column_pivoted(U.T)
    d = qr.diag_abs
    if d[0] == 0.0 or d[m - 1] < rank_tol(n) * d[0]:
        raise RankDeficientError(f"U is numerically rank deficient (|T_mm|/|T_11| = {d[m - 1] / max(d[0], 1e-300):.3e})")
    sel = SelectionOperator(qr.perm[:m], n)
    return (sel, qr) if return_factor else sel


def lu_pp_select(U):
    """Row indices chosen by Gaussian elimination with partial pivoting.

    Pivot rows are returned in elimination order; ties in magnitude go to
    the smaller original row index, the same rule :func:`deim_select` uses.
    """
    A = as_matrix(U, "U")
    n, m = A.shape
    if m > n:
        raise RankDeficientError(f"cannot select {m} rows from n={n}")
    perm = np.arange(n)
    for j in range(m):
        i = j + pick_pivot(np.abs(A[j:, j]), perm[j:])
        if i != j:
            A[[j, i]] = A[[i, j]]
            perm[[j, i]] = perm[[i, j]]
        piv = A[j, j]
        if piv == 0.0:
            raise RankDeficientError(f"column {j} is dependent on the previous ones")
        A[j + 1 :, j] /= piv
        A[j + 1 :, j + 1 :] -= np.outer(A[j + 1 :, j], A[j, j + 1 :])
    return SelectionOperator(perm[:m], n)


def random_select(U, trials=1, seed=None):
    """Best of ``trials`` uniformly drawn ``m``-subsets, judged by exact c.

    Draws whose selected block is singular are discarded.

    Returns
    -------
    SelectionOperator
    """
    U = as_matrix(U, "U")
    n, m = U.shape
    if m > n:
        raise ValueError(f"need m <= n, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    best, best_c = None, math.inf
    for _ in range(trials):
        idx = rng.choice(n, size=m, replace=False)
        c = condition_number(U, idx)
        if c < best_c:
            best, best_c = idx, c
    if best is None:
        raise RankDeficientError(f"all {trials} random selections were singular")
    return SelectionOperator(best, n)


def brute_force_volume_select(U, chunk=20000):
    """Row subset maximizing ``|det(S^T U)|`` by exhaustive enumeration.

    Among (near) ties the lexicographically smallest index tuple wins.
    Refuses instances with more than ``10**6`` candidate subsets.
    """
    U = as_matrix(U, "U")
    n, m = U.shape
    total = math.comb(n, m)
    if total > MAX_BRUTE_FORCE:
        raise ValueError(f"binomial({n}, {m}) = {total} subsets is too many to enumerate")
    best_vol, best_idx = -1.0, None
    combos = itertools.combinations(range(n), m)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        vols = np.abs(np.linalg.det(U[block]))
        vmax = vols.max()
        if vmax > best_vol * (1.0 + TIE_RTOL):
            first = np.flatnonzero(vols >= vmax * (1.0 - TIE_RTOL))[0]
            best_vol, best_idx = vmax, block[first]
    return SelectionOperator(best_idx, n)


def _hull(points):
    """Indices of the convex hull vertices of 2-D ``points`` (monotone chain)."""
    order = np.lexsort((points[:, 1], points[:, 0]))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for i in order:
        while len(lower) >= 2 and cross(points[lower[-2]], points[lower[-1]], points[i]) <= 0:
            lower.pop()
        lower.append(i)
    for i in order[::-1]:
        while len(upper) >= 2 and cross(points[upper[-2]], points[upper[-1]], points[i]) <= 0:
            upper.pop()
        upper.append(i)
    return np.unique(np.array(lower[:-1] + upper[:-1], dtype=np.intp))


def refine_volume(U, sel, qr):
    """Swap the last two Q-DEIM indices for a larger-volume pair.

    All ``2 x 2`` determinants of ``R[m-2:m, m-2:]`` are candidates; the
    maximum is attained at a pair of convex hull vertices of the columns
    and their negatives, so only those pairs are searched. The selection
    changes only if the volume strictly increases.

    Parameters
    ----------
    U : array_like, shape (n, m)
    sel : SelectionOperator
        Output of :func:`qdeim_select`.
    qr : PivotedQrFactor
        The factorization returned alongside ``sel``.
    """
    U = np.asarray(U, dtype=float)
    n, m = U.shape
    if m < 2 or n < m + 1:
        return sel
    if not np.array_equal(qr.perm[:m], sel.indices):
        raise ValueError("sel does not match the leading pivots of qr")
    B = qr.r_factor[m - 2 : m, m - 2 :]
    current = abs(B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0])
    ncols = B.shape[1]
    pts = np.vstack([B.T, -B.T])
    verts = np.unique(_hull(pts) % ncols)
    if verts.size < 2:
        return sel
    a, b = np.triu_indices(verts.size, k=1)
    ia, ib = verts[a], verts[b]
    dets = np.abs(B[0, ia] * B[1, ib] - B[0, ib] * B[1, ia])
    k = int(np.argmax(dets))
    if dets[k] <= current * (1.0 + TIE_RTOL):
        return sel
    pa, pb = ia[k], ib[k]
    if np.hypot(*B[:, pb]) > np.hypot(*B[:, pa]):
        pa, pb = pb, pa
    new = np.concatenate([sel.indices[: m - 2], qr.perm[m - 2 + np.array([pa, pb])]])
    return SelectionOperator(new, n)


@dataclass(frozen=True)
class QdeimrConfig:
    """Parameters of :func:`qdeimr_select`; ``None`` means the default.

    window_k
        Columns of ``U^T`` held in the work array (default ``m``).
    c_threshold
        Upper bound demanded of the condition estimate
        (default ``sqrt(m) * sqrt(n - m + 1)``).
    sampling
        ``"uniform"``, ``"norm-sorted"`` or ``"norm-weighted"``.
    max_row_visits
        Total rows of U that may be touched (default ``n``).
    restart_policy
        ``"continue"`` keeps accepted pivots after a rejection,
        ``"restart-pivoting"`` restarts the factorization of the work array.
    stall_limit
        Under ``"continue"``, this many consecutive rejections at the same
        step trigger one restart of the pivoting; ``None`` disables it.
    """

    window_k: int = None
    c_threshold: float = None
    sampling: str = "uniform"
    seed: int = 0
    max_row_visits: int = None
    restart_policy: str = "continue"
    stall_limit: int = 2

    def resolved(self, n, m):
        cfg = replace(
            self,
            window_k=m if self.window_k is None else int(self.window_k),
            c_threshold=math.sqrt(m) * math.sqrt(n - m + 1) if self.c_threshold is None else float(self.c_threshold),
            max_row_visits=n if self.max_row_visits is None else int(self.max_row_visits),
        )
        if cfg.window_k < 1:
            raise ValueError("window_k must be >= 1")
        if not cfg.c_threshold > 0:
            raise ValueError("c_threshold must be positive")
        if not m <= cfg.max_row_visits <= n:
            raise ValueError(f"max_row_visits must lie in [{m}, {n}]")
        if cfg.sampling not in SAMPLINGS:
            raise ValueError(f"unknown sampling {cfg.sampling!r}; choose from {SAMPLINGS}")
        if cfg.restart_policy not in RESTART_POLICIES:
            raise ValueError(f"unknown restart_policy {cfg.restart_policy!r}")
        return cfg


@dataclass
class SelectionReport:
    """Selection plus the statistics reported by the selection commands."""

    selection: SelectionOperator
    c_exact: float
    c_bound_used: float
    rows_visited: int
    resample_rounds: int = 0
    wall_time: float = 0.0
    method: str = ""
    seed: int = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        """JSON-ready dict with one-based indices."""
        out = {
            "n": int(self.selection.ambient_dim),
            "m": int(len(self.selection)),
            "indices": [int(i) + 1 for i in self.selection.indices],
            "c": float(self.c_exact),
            "method": self.method,
            "seed": self.seed,
            "rows_visited": int(self.rows_visited),
            "resample_rounds": int(self.resample_rounds),
            "c_bound_used": None if self.c_bound_used is None else float(self.c_bound_used),
        }
        out.update(self.extra)
        out["wall_time"] = float(self.wall_time)
        return out


class _Sampler:
    """Draws fresh column indices of ``W`` from the active set."""

    def __init__(self, W, kind, rng):
        self.kind = kind
        self.rng = rng
        self.active = np.ones(W.shape[1], dtype=bool)
        if kind != "uniform":
            self.weights = np.einsum("ij,ij->j", W, W)
        if kind == "norm-sorted":
            self.order = np.argsort(-self.weights, kind="stable")
            self.cursor = 0

    def remaining(self):
        return int(self.active.sum())

    def draw(self, count):
        pool = np.flatnonzero(self.active)
        count = min(count, pool.size)
        if count <= 0:
            return np.zeros(0, dtype=np.intp)
        if self.kind == "uniform":
            idx = self.rng.permutation(pool)[:count]
        elif self.kind == "norm-weighted":
            w = self.weights[pool]
            nz = np.count_nonzero(w)
            if nz < count:
                idx = np.concatenate([pool[w > 0], pool[w == 0][: count - nz]])
            else:
                idx = self.rng.choice(pool, size=count, replace=False, p=w / w.sum())
        else:
            out = []
            while len(out) < count:
                j = self.order[self.cursor]
                self.cursor += 1
                if self.active[j]:
                    out.append(j)
            idx = np.array(out, dtype=np.intp)
        self.active[idx] = False
        return idx


def _qdeimr_single(W, m, cfg, rng):
    n = W.shape[1]
    k, thr, budget = cfg.window_k, cfg.c_threshold, cfg.max_row_visits
    sampler = _Sampler(W, cfg.sampling, rng)
    visited = 0
    rounds = 0
    refl = []
    ice_hist = [IceState()]

    def fetch(count):
        nonlocal visited
        count = max(0, min(count, budget - visited))
        idx = sampler.draw(count)
        visited += idx.size
        cols = W[:, idx].copy()
        for j, (v, tau) in enumerate(refl):
            if tau != 0.0:
                cols[j:] -= np.outer(tau * v, v @ cols[j:])
        return idx, cols

    gidx, L = fetch(k)
    j = 0
    stall = 0
    restarts = 0

    def partial():
        c = condition_number_from_triangle(L[:j, :j]) if j else math.inf
        sel = SelectionOperator(gidx[:j], n)
        return SelectionReport(sel, c, thr, visited, rounds, method="qdeimr", seed=cfg.seed)

    while j < m:
        if L.shape[1] <= j:
            idx, cols = fetch(max(k - j, 1))
            if idx.size == 0:
                raise BudgetExceededError(f"row budget exhausted after {j} of {m} pivots", partial())
            gidx = np.concatenate([gidx, idx])
            L = np.hstack([L, cols])
        norms = np.linalg.norm(L[j:, j:], axis=0)
        q = j + pick_pivot(norms, gidx[j:])
        if q != j:
            L[:, [j, q]] = L[:, [q, j]]
            gidx[[j, q]] = gidx[[q, j]]
        v, tau, beta = _householder(L[j:, j])
        ok = beta != 0.0
        if ok:
            est = ice_append(ice_hist[-1], L[:j, j], beta)
            ok = est.gamma <= thr
        if ok and j == m - 1:
            T = L[:m, :m].copy()
            T[m - 1, m - 1] = beta
            T[m:, m - 1] = 0.0
            ok = condition_number_from_triangle(T) <= thr
        if ok:
            L[j, j] = beta
            L[j + 1 :, j] = 0.0
            if tau != 0.0 and j + 1 < L.shape[1]:
                L[j:, j + 1 :] -= np.outer(tau * v, v @ L[j:, j + 1 :])
            refl.append((v, tau))
            ice_hist.append(est)
            j += 1
            stall = 0
            continue
        rounds += 1
        stall += 1
        stuck = cfg.stall_limit is not None and stall >= cfg.stall_limit
        if cfg.restart_policy == "continue" and not stuck:
            gidx, L = gidx[:j], L[:, :j]
            idx, cols = fetch(max(k - j, 1))
            if idx.size == 0:
                raise BudgetExceededError(f"row budget exhausted after {j} of {m} pivots", partial())
            gidx = np.concatenate([gidx, idx])
            L = np.hstack([L, cols])
        else:
            keep = gidx[:j]
            refl.clear()
            del ice_hist[1:]
            idx, cols = fetch(max(k - j, 1))
            if idx.size == 0:
                raise BudgetExceededError(f"row budget exhausted before {m} pivots", partial())
            gidx = np.concatenate([keep, idx])
            L = W[:, gidx].copy()
            j = 0
            stall = 0
            restarts += 1
    sel = SelectionOperator(gidx[:m], n)
    c = condition_number_from_triangle(L[:m, :m])
    return SelectionReport(sel, c, thr, visited, rounds, method="qdeimr", seed=cfg.seed, extra={"restarts": restarts})


def condition_number_from_triangle(T):
    """``||T^{-1}||_2`` for a square triangular factor."""
    smin = smallest_singular_value(np.triu(T))
    return math.inf if smin == 0.0 else 1.0 / smin


def qdeimr_select(U, cfg=None, workers=1):
    """Restricted randomized Q-DEIM.

    Pivoted QR runs on a small work array of sampled columns of
    ``W = U^T``. Each candidate pivot is accepted only while the
    incremental estimate of ``||T^{-1}||`` stays below
    ``cfg.c_threshold``; on rejection the unused columns are thrown away and
    fresh ones are drawn, transformed by the reflectors accepted so far, and
    the factorization continues (or restarts, per ``restart_policy``). The
    final triangular factor is checked exactly before the last pivot is
    accepted, so the reported ``c_exact`` never exceeds the threshold.

    With ``workers > 1`` independent searches run on sub-seeds of
    ``cfg.seed`` and the successful one with the smallest c is returned.

    Raises
    ------
    BudgetExceededError
        If ``max_row_visits`` rows were used before ``m`` pivots passed.
    """
    U = as_matrix(U, "U")
    n, m = U.shape
    if m > n:
        raise RankDeficientError(f"cannot select {m} rows from n={n}")
    cfg = (cfg or QdeimrConfig()).resolved(n, m)
    W = U.T.copy()
    t0 = time.perf_counter()
    if workers <= 1:
        rep = _qdeimr_single(W, m, cfg, np.random.default_rng(cfg.seed))
    else:
        seeds = np.random.SeedSequence(cfg.seed).spawn(workers)

        def run(ss):
            try:
                return _qdeimr_single(W, m, cfg, np.random.default_rng(ss))
            except BudgetExceededError as exc:
                return exc

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, seeds))
        wins = [r for r in results if isinstance(r, SelectionReport)]
        if not wins:
            raise results[0]
        rep = min(wins, key=lambda r: r.c_exact)
        rep.extra["workers"] = workers
        rep.extra["rows_visited_all_workers"] = int(sum(r.rows_visited for r in wins))
    rep.wall_time = time.perf_counter() - t0
    return rep
