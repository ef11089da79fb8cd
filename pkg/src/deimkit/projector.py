"""The DEIM oblique projector ``f -> U (S^T U)^{-1} S^T f``."""

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .exceptions import SingularMatrixError
from .linalg import as_matrix, qr_column_pivoted, smallest_singular_value, solve_upper_triangular
from .selection import SelectionOperator

__all__ = ["DeimProjector", "ErrorSplit", "build_projector", "apply", "error_split"]

ErrorSplit = namedtuple("ErrorSplit", ["deim_err", "orth_err", "bound"])


@dataclass(frozen=True)
class DeimProjector:
    """Precomputed interpolation matrix ``M = U (S^T U)^{-1}``.

    Rows of ``interp_matrix`` at the selected indices hold the identity
    exactly, so ``apply`` reproduces the selected entries of its argument
    bit for bit.

    Attributes
    ----------
    basis : ndarray, shape (n, m)
    selection : SelectionOperator
    interp_matrix : ndarray, shape (n, m)
    c : float
        ``||(S^T U)^{-1}||_2``.
    triangle : ndarray, shape (m, m)
        Upper-triangular factor with ``U[sel]^T = Q T``.
    """

    basis: np.ndarray
    selection: SelectionOperator
    interp_matrix: np.ndarray
    c: float
    triangle: np.ndarray

    @property
    def shape(self):
        return self.basis.shape

    def apply(self, f):
        return apply(self, f)


def build_projector(U, sel, qr=None):
    """Assemble the DEIM projector for basis ``U`` and selection ``sel``.

    With ``U[sel]^T = Q T`` and ``K = Q^T U[rest]^T`` the non-selected rows
    of M are ``(T^{-1} K)^T``. The solve is done on the row-scaled factor
    ``D^{-1} T`` (unit diagonal) against ``D^{-1} K``.

    Parameters
    ----------
    U : array_like, shape (n, m)
    sel : SelectionOperator or sequence of int
    qr : PivotedQrFactor, optional
        Pivoted QR of ``U^T`` whose leading pivots are ``sel`` (as returned
        by ``qdeim_select(U, return_factor=True)``); reused when given.
        Otherwise an unpivoted QR of ``U[sel]^T`` is computed.

    Raises
    ------
    SingularMatrixError
        If ``U[sel]`` is singular.
    """
    U = as_matrix(U, "U")
    n, m = U.shape
    if not isinstance(sel, SelectionOperator):
        sel = SelectionOperator(sel, n)
    if len(sel) != m or sel.ambient_dim != n:
        raise ValueError(f"selection of {len(sel)} indices in dimension {sel.ambient_dim} does not fit U {U.shape}")
    idx = sel.indices
    if qr is not None and qr.shape == (m, n) and np.array_equal(qr.perm[:m], idx) and qr.steps == m:
        T = qr.r_factor[:, :m]
        K = qr.r_factor[:, m:]
        rest = qr.perm[m:]
    else:
        f = qr_column_pivoted(U[idx].T, pivoting=False)
        T = f.r_factor
        mask = np.ones(n, dtype=bool)
        mask[idx] = False
        rest = np.flatnonzero(mask)
        K = f.apply_qt(U[rest].T)
    d = np.diag(T).copy()
    if np.any(d == 0.0):
        raise SingularMatrixError(f"U[sel] is singular for sel={idx.tolist()}", index=int(np.flatnonzero(d == 0.0)[0]))
    X = solve_upper_triangular(T / d[:, None], K / d[:, None])
    M = np.zeros((n, m))
    M[idx, np.arange(m)] = 1.0
    M[rest] = X.T
    smin = smallest_singular_value(T)
    return DeimProjector(U, sel, M, 1.0 / smin, np.array(T))


def apply(proj, f):
    """``M (S^T f)`` for a vector or for each column of a matrix."""
    f = np.asarray(f, dtype=float)
    n = proj.basis.shape[0]
    if f.shape[0] != n:
        raise ValueError(f"f has leading dimension {f.shape[0]}, expected {n}")
    return proj.interp_matrix @ f[proj.selection.indices]


def error_split(proj, f):
    """DEIM error, orthogonal projection error and the bound ``c * orth_err``.

    Assumes an orthonormal basis, for which ``deim_err <= bound`` holds.
    """
    f = np.asarray(f, dtype=float)
    U = proj.basis
    deim_err = float(np.linalg.norm(f - apply(proj, f)))
    orth_err = float(np.linalg.norm(f - U @ (U.T @ f)))
    return ErrorSplit(deim_err, orth_err, proj.c * orth_err)
