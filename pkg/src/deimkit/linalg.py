"""Dense linear algebra kernels written on top of plain numpy arrays.

Householder QR with Businger-Golub column pivoting, back substitution,
a one-sided Jacobi SVD, incremental condition estimation for growing
triangular factors and Haar-distributed orthonormal matrices.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._constants import EPS, JACOBI_MAX_SWEEPS, JACOBI_TOL, NORM_RECOMPUTE, TIE_RTOL
from .exceptions import NonFiniteError, SingularMatrixError

__all__ = [
    "PivotedQrFactor",
    "IceState",
    "as_matrix",
    "qr_column_pivoted",
    "solve_upper_triangular",
    "thin_svd",
    "smallest_singular_value",
    "ice_append",
    "haar_orthonormal",
    "pick_pivot",
]


def as_matrix(A, name="matrix", copy=True):
    """Return ``A`` as a finite 2-D float array (copied by default)."""
    A = np.array(A, dtype=float, copy=copy)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return A


def pick_pivot(values, labels):
    """Position of the largest entry of ``values``.

    Entries within ``TIE_RTOL`` of the maximum count as ties; among ties the
    one with the smallest ``labels`` value wins.
    """
    vmax = values.max()
    if vmax <= 0.0:
        return 0
    cands = np.flatnonzero(values >= vmax * (1.0 - TIE_RTOL))
    if cands.size == 1:
        return int(cands[0])
    return int(cands[np.argmin(labels[cands])])


def _householder(x):
    """Reflector ``H = I - tau v v^T`` with ``H x = beta e_1`` and ``v[0] = 1``."""
    v = np.array(x, dtype=float)
    x0 = v[0]
    tail = np.linalg.norm(v[1:]) if v.size > 1 else 0.0
    if tail == 0.0:
        v[:] = 0.0
        v[0] = 1.0
        return v, 0.0, x0
    beta = -np.copysign(np.hypot(x0, tail), x0)
    tau = (beta - x0) / beta
    v[1:] /= x0 - beta
    v[0] = 1.0
    return v, tau, beta


@dataclass
class PivotedQrFactor:
    """Householder QR of ``A[:, perm] = Q R``.

    ``reflectors[k]`` is the Householder vector acting on rows ``k:`` and
    ``taus[k]`` its scalar factor. ``r_factor`` has one row per reflector; it
    is the full upper-trapezoidal R unless the factorization stopped early
    on a rank tolerance.
    """

    reflectors: list
    taus: np.ndarray
    r_factor: np.ndarray
    perm: np.ndarray
    shape: tuple
    diag_abs: np.ndarray = field(init=False)

    def __post_init__(self):
        k = len(self.reflectors)
        self.diag_abs = np.abs(np.diag(self.r_factor[:, :k]))

    @property
    def steps(self):
        return len(self.reflectors)

    def apply_qt(self, X):
        """Return ``Q^T X`` for ``X`` with ``shape[0]`` rows."""
        X = np.array(X, dtype=float)
        vec = X.ndim == 1
        if vec:
            X = X[:, None]
        for k, (v, tau) in enumerate(zip(self.reflectors, self.taus)):
            if tau != 0.0:
                X[k:] -= np.outer(tau * v, v @ X[k:])
        return X[:, 0] if vec else X

    def apply_q(self, X):
        """Return ``Q X``."""
        X = np.array(X, dtype=float)
        vec = X.ndim == 1
        if vec:
            X = X[:, None]
        for k in reversed(range(self.steps)):
            tau = self.taus[k]
            if tau != 0.0:
                v = self.reflectors[k]
                X[k:] -= np.outer(tau * v, v @ X[k:])
        return X[:, 0] if vec else X

    def q(self, ncols=None):
        """Explicit orthonormal factor with ``ncols`` columns (default: steps)."""
        m = self.shape[0]
        ncols = self.steps if ncols is None else ncols
        return self.apply_q(np.eye(m, ncols))

    def permutation_matrix(self):
        n = self.shape[1]
        P = np.zeros((n, n))
        P[self.perm, np.arange(n)] = 1.0
        return P


def qr_column_pivoted(A, pivoting=True, stop_tol=None):
    """Householder QR factorization with Businger-Golub column pivoting.

    At step ``k`` the trailing column of largest Euclidean norm is swapped
    into position ``k`` (ties go to the smallest original column index).
    Trailing norms are downdated after every reflector and recomputed
    exactly when cancellation makes the downdate untrustworthy.

    Parameters
    ----------
    A : array_like, shape (m, n)
    pivoting : bool
        ``False`` gives plain Householder QR with ``perm = arange(n)``.
    stop_tol : float, optional
        Stop as soon as the Frobenius norm of the trailing block drops to or
        below ``stop_tol`` (pivoting only). The returned ``r_factor`` then
        has fewer than ``min(m, n)`` rows.

    Returns
    -------
    PivotedQrFactor
    """
    R = as_matrix(A, "A")
    m, n = R.shape
    perm = np.arange(n)
    steps = min(m, n)
    vs, taus = [], []
    if pivoting:
        vn1 = np.linalg.norm(R, axis=0)
        vn2 = vn1.copy()
    for k in range(steps):
        if pivoting:
            if stop_tol is not None and np.sqrt(np.sum(vn1[k:] ** 2)) <= stop_tol:
                if np.linalg.norm(R[k:, k:]) <= stop_tol:
                    break
            j = k + pick_pivot(vn1[k:], perm[k:])
            if j != k:
                R[:, [k, j]] = R[:, [j, k]]
                perm[[k, j]] = perm[[j, k]]
                vn1[[k, j]] = vn1[[j, k]]
                vn2[[k, j]] = vn2[[j, k]]
        v, tau, beta = _householder(R[k:, k])
        R[k, k] = beta
        R[k + 1 :, k] = 0.0
        if tau != 0.0 and k + 1 < n:
            R[k:, k + 1 :] -= np.outer(tau * v, v @ R[k:, k + 1 :])
        vs.append(v)
        taus.append(tau)
        if pivoting and k + 1 < n:
            _downdate_norms(R, k, vn1, vn2)
    r = np.triu(R[: len(vs)])
    return PivotedQrFactor(vs, np.array(taus), r, perm, (m, n))


def _downdate_norms(R, k, vn1, vn2):
    m = R.shape[0]
    tail = slice(k + 1, None)
    cur = vn1[tail]
    live = cur != 0.0
    ratio = np.zeros_like(cur)
    ratio[live] = np.abs(R[k, tail][live]) / cur[live]
    temp = np.maximum(0.0, 1.0 - ratio**2)
    temp2 = np.zeros_like(cur)
    ref = vn2[tail]
    ok = live & (ref != 0.0)
    temp2[ok] = temp[ok] * (cur[ok] / ref[ok]) ** 2
    redo = live & (temp2 <= NORM_RECOMPUTE)
    new = cur * np.sqrt(temp)
    if np.any(redo):
        cols = np.flatnonzero(redo) + k + 1
        exact = np.linalg.norm(R[k + 1 :, cols], axis=0) if k + 1 < m else np.zeros(cols.size)
        new[redo] = exact
        vn2[cols] = exact
    vn1[tail] = new


def solve_upper_triangular(T, B):
    """Solve ``T X = B`` by back substitution, column block at a time.

    Raises
    ------
    SingularMatrixError
        If a diagonal entry of ``T`` is zero; ``index`` names it.
    """
    T = np.asarray(T, dtype=float)
    m = T.shape[0]
    if T.ndim != 2 or T.shape[1] != m:
        raise ValueError(f"T must be square, got shape {T.shape}")
    d = np.diag(T)
    zero = np.flatnonzero(d == 0.0)
    if zero.size:
        raise SingularMatrixError(f"zero diagonal entry at index {zero[0]}", index=int(zero[0]))
    X = np.array(B, dtype=float)
    vec = X.ndim == 1
    if vec:
        X = X[:, None]
    if X.shape[0] != m:
        raise ValueError(f"B has {X.shape[0]} rows, expected {m}")
    for i in range(m - 1, -1, -1):
        if i + 1 < m:
            X[i] -= T[i, i + 1 :] @ X[i + 1 :]
        X[i] /= d[i]
    return X[:, 0] if vec else X


def _round_robin(c):
    """Tournament schedule: ``c - 1`` (or ``c``) rounds of disjoint pairs."""
    players = list(range(c)) + ([-1] if c % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a >= 0 and b >= 0]
        I = np.array([a for a, _ in pairs], dtype=int)
        J = np.array([b for _, b in pairs], dtype=int)
        rounds.append((I, J))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi_columns(X, tol):
    """Orthogonalize the columns of ``X`` in place by one-sided Jacobi.

    Returns ``(X, V, sweeps)`` with ``X_out = X_in @ V``.
    """
    c = X.shape[1]
    V = np.eye(c)
    if c == 1:
        return X, V, 0
    rounds = _round_robin(c)
    sweeps = 0
    for sweeps in range(1, JACOBI_MAX_SWEEPS + 1):
        rotated = False
        for I, J in rounds:
            xi = X[:, I]
            xj = X[:, J]
            a = np.einsum("ij,ij->j", xi, xi)
            b = np.einsum("ij,ij->j", xj, xj)
            g = np.einsum("ij,ij->j", xi, xj)
            act = np.abs(g) > tol * np.sqrt(a) * np.sqrt(b)
            if not act.any():
                continue
            rotated = True
            I, J, a, b, g = I[act], J[act], a[act], b[act], g[act]
            zeta = (b - a) / (2.0 * g)
            t = np.where(zeta >= 0.0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            cs = 1.0 / np.sqrt(1.0 + t * t)
            sn = cs * t
            for M in (X, V):
                mi = M[:, I]
                mj = M[:, J]
                M[:, I] = cs * mi - sn * mj
                M[:, J] = sn * mi + cs * mj
        if not rotated:
            return X, V, sweeps
    warnings.warn(f"one-sided Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps", RuntimeWarning)
    return X, V, sweeps


def _orthonormal_complement(Y):
    """Orthonormal basis of the complement of the (orthonormal) columns of ``Y``."""
    q, g = Y.shape
    if g == 0:
        return np.eye(q)
    f = qr_column_pivoted(Y, pivoting=False)
    return f.apply_q(np.eye(q)[:, g:])


def thin_svd(A, deflate=True):
    """Thin SVD ``A = Z diag(sigma) Y^T`` by preconditioned one-sided Jacobi.

    The wider orientation is transposed away, a column pivoted QR
    ``A P = Q R`` compresses the problem (rows of R below ``eps * ||A||_F``
    are dropped unless ``deflate=False``), and one-sided Jacobi
    orthogonalizes the columns of ``R^T``. Singular vectors belonging to
    exactly zero singular values are completed to orthonormal sets.

    Parameters
    ----------
    A : array_like, shape (n, N)
    deflate : bool, default True
        Dropping the roundoff-level block is much cheaper for numerically
        low-rank input, but the singular vectors of those directions are
        then an arbitrary orthonormal completion. With ``deflate=False``
        they are computed from the data, as a bidiagonalization SVD would.

    Returns
    -------
    Z : ndarray, shape (n, k)
    sigma : ndarray, shape (k,)
        Non-increasing and non-negative.
    Y : ndarray, shape (N, k)
        ``k = min(n, N)``.
    """
    A = as_matrix(A, "A")
    transposed = A.shape[0] < A.shape[1]
    if transposed:
        A = A.T
    p, q = A.shape
    anorm = np.linalg.norm(A)
    if anorm == 0.0:
        Z, sigma, Y = np.eye(p, q), np.zeros(q), np.eye(q)
        return (Y, sigma, Z) if transposed else (Z, sigma, Y)

    qr = qr_column_pivoted(A, stop_tol=EPS * anorm if deflate else 0.0)
    rho = qr.steps
    X = qr.r_factor.T.copy()
    tol = max(JACOBI_TOL, np.sqrt(q) * EPS)
    X, V, _ = _jacobi_columns(X, tol)
    s = np.linalg.norm(X, axis=0)
    good = s > 0.0
    order = np.argsort(-s[good], kind="stable")
    good_idx = np.flatnonzero(good)[order]
    bad_idx = np.flatnonzero(~good)

    Yp = X[:, good_idx] / s[good_idx]
    Y_good = np.empty_like(Yp)
    Y_good[qr.perm] = Yp
    Y_rest = _orthonormal_complement(Y_good)

    lift = np.zeros((p, rho))
    lift[:rho] = V
    Z1 = qr.apply_q(lift)
    Zc = qr.apply_q(np.eye(p, q)[:, rho:]) if rho < q else np.empty((p, 0))
    Z = np.hstack([Z1[:, good_idx], Z1[:, bad_idx], Zc])
    Y = np.hstack([Y_good, Y_rest])
    sigma = np.concatenate([s[good_idx], np.zeros(q - good_idx.size)])
    return (Y, sigma, Z) if transposed else (Z, sigma, Y)


def smallest_singular_value(T):
    """Smallest singular value of a square matrix, via :func:`thin_svd`.

    No deflation: tiny singular values are computed, not set to zero.
    """
    T = as_matrix(T, "T")
    if T.shape[0] != T.shape[1]:
        raise ValueError(f"T must be square, got shape {T.shape}")
    return float(thin_svd(T, deflate=False)[1][-1])


@dataclass(frozen=True)
class IceState:
    """Incremental estimate of ``||T(:j, :j)^{-1}||_2`` for upper-triangular T.

    ``approx_left_vector`` is a unit vector ``x`` and ``solution`` equals
    ``T^{-T} x``, so ``gamma = ||solution||`` never exceeds the true norm.
    """

    dim: int = 0
    approx_left_vector: np.ndarray = field(default_factory=lambda: np.zeros(0))
    solution: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gamma: float = 0.0


def ice_append(state, new_column, new_diag):
    """Grow the estimate by one column ``[new_column; new_diag]`` of T.

    The new left vector is ``[s x; c]`` with ``(s, c)`` chosen to maximize
    ``||T^{-T} [s x; c]||`` exactly over the unit circle (a 2x2 symmetric
    eigenproblem), which costs one inner product of length ``j - 1``.
    """
    new_diag = float(new_diag)
    if new_diag == 0.0 or not np.isfinite(new_diag):
        raise SingularMatrixError("zero diagonal appended to triangular factor", index=state.dim)
    if state.dim == 0:
        z = np.array([1.0 / new_diag])
        return IceState(1, np.array([1.0]), z, abs(z[0]))
    v = np.asarray(new_column, dtype=float)
    if v.shape != (state.dim,):
        raise ValueError(f"new_column must have length {state.dim}")
    alpha = float(v @ state.solution)
    # 2x2 form scaled by new_diag**2: [[(gamma*d)^2 + alpha^2, -alpha], [-alpha, 1]]
    p = (state.gamma * new_diag) ** 2 + alpha**2
    off = -alpha
    half = 0.5 * (p - 1.0)
    lam = 0.5 * (p + 1.0) + np.hypot(half, off)
    if off != 0.0:
        s, c = lam - 1.0, off
        nrm = np.hypot(s, c)
        s, c = s / nrm, c / nrm
    else:
        s, c = (1.0, 0.0) if p >= 1.0 else (0.0, 1.0)
    x = np.concatenate([s * state.approx_left_vector, [c]])
    z = np.concatenate([s * state.solution, [(c - s * alpha) / new_diag]])
    gamma = max(float(np.linalg.norm(z)), state.gamma)
    return IceState(state.dim + 1, x, z, gamma)


def haar_orthonormal(n, m, seed=None):
    """Random ``n x m`` matrix with orthonormal columns, Haar distributed.

    QR of an i.i.d. standard normal matrix with the diagonal of R made
    positive. ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if m > n:
        raise ValueError(f"need m <= n, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, m))
    f = qr_column_pivoted(G, pivoting=False)
    d = np.sign(np.diag(f.r_factor))
    d[d == 0.0] = 1.0
    return f.q(m) * d
