"""Snapshot matrices and POD bases."""

from dataclasses import dataclass, field

import numpy as np

from ._constants import POD_ENERGY_TOL
from .linalg import as_matrix, thin_svd

__all__ = [
    "SnapshotSet",
    "PodBasis",
    "pod_basis",
    "truncation_rank",
    "reconstruction_error",
    "rowwise_relative_errors",
]


@dataclass
class SnapshotSet:
    """Snapshots as columns plus the time or parameter of each column.

    ``flagged`` lists columns that could not be evaluated (non-finite).
    """

    matrix: np.ndarray
    times_or_params: np.ndarray
    flagged: tuple = field(default=())

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise ValueError("snapshot matrix must be 2-D")
        self.times_or_params = np.asarray(self.times_or_params, dtype=float)
        if self.matrix.shape[1] < 1:
            raise ValueError("need at least one snapshot")
        if self.times_or_params.shape != (self.matrix.shape[1],):
            raise ValueError(
                f"{self.matrix.shape[1]} snapshots but {self.times_or_params.size} coordinates"
            )

    @property
    def shape(self):
        return self.matrix.shape

    def drop_flagged(self):
        keep = np.setdiff1d(np.arange(self.matrix.shape[1]), np.asarray(self.flagged, dtype=int))
        return SnapshotSet(self.matrix[:, keep], self.times_or_params[keep])


@dataclass
class PodBasis:
    vectors: np.ndarray
    singular_values: np.ndarray
    rank_used: int
    mean: np.ndarray = None


def truncation_rank(sigma, energy_tol):
    """Smallest r with ``sum(sigma[r:]**2) <= energy_tol**2 * sum(sigma**2)``."""
    e = np.asarray(sigma, dtype=float) ** 2
    total = e.sum()
    if total == 0.0:
        return 1
    tail = np.append(np.cumsum(e[::-1])[::-1], 0.0)
    ok = np.flatnonzero(tail <= energy_tol**2 * total)
    return max(1, int(ok[0]))


def pod_basis(snaps, rank=None, energy_tol=None, center=False, deflate=True):
    """Leading left singular vectors of the snapshot matrix.

    Give either ``rank`` or ``energy_tol``; with neither, the relative tail
    energy tolerance defaults to 1e-8. Snapshots are not centered unless
    ``center=True``. ``deflate`` is passed to :func:`~deimkit.linalg.thin_svd`.
    """
    X = snaps.matrix if isinstance(snaps, SnapshotSet) else snaps
    X = as_matrix(X, "snapshots")
    mean = None
    if center:
        mean = X.mean(axis=1)
        X = X - mean[:, None]
    Z, sigma, _ = thin_svd(X, deflate=deflate)
    if rank is None:
        rank = truncation_rank(sigma, POD_ENERGY_TOL if energy_tol is None else energy_tol)
    elif energy_tol is not None:
        raise ValueError("give rank or energy_tol, not both")
    if not 1 <= rank <= sigma.size:
        raise ValueError(f"rank {rank} outside [1, {sigma.size}]")
    if energy_tol is not None and not 0.0 < energy_tol < 1.0:
        raise ValueError("energy_tol must lie in (0, 1)")
    return PodBasis(Z[:, :rank].copy(), sigma, int(rank), mean)


def reconstruction_error(snaps, V, reduced_snaps):
    """``||X - V Xr||_F / ||X||_F``."""
    X = snaps.matrix if isinstance(snaps, SnapshotSet) else np.asarray(snaps, dtype=float)
    V = V.vectors if isinstance(V, PodBasis) else np.asarray(V, dtype=float)
    Xr = np.asarray(reduced_snaps, dtype=float)
    if V.shape[0] != X.shape[0] or Xr.shape != (V.shape[1], X.shape[1]):
        raise ValueError(f"shapes do not conform: X {X.shape}, V {V.shape}, reduced {Xr.shape}")
    return float(np.linalg.norm(X - V @ Xr) / np.linalg.norm(X))


def rowwise_relative_errors(X, Xhat, return_flags=False):
    """Relative 2-norm error of every row of ``Xhat`` against ``X``.

    Rows of ``X`` with zero norm get the absolute error instead; with
    ``return_flags=True`` a boolean mask of those rows is returned too.
    """
    X = np.asarray(X, dtype=float)
    Xhat = np.asarray(Xhat, dtype=float)
    if X.shape != Xhat.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {Xhat.shape}")
    diff = np.linalg.norm(X - Xhat, axis=1)
    ref = np.linalg.norm(X, axis=1)
    zero = ref == 0.0
    err = np.where(zero, diff, diff / np.where(zero, 1.0, ref))
    return (err, zero) if return_flags else err
