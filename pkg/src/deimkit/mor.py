"""Full order benchmark models, Galerkin/DEIM reduction and time stepping.

Models have the form ``E x' = A x + f(x) + B g(t)``. The nonlinearity
declares which state entries each of its components reads, which is what
lets the reduced model evaluate only the interpolated components.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import IntegrationError
from .pod import SnapshotSet
from .projector import apply as deim_apply

__all__ = [
    "Nonlinearity",
    "Elementwise",
    "FitzHughNagumoCubic",
    "DiodeLadder",
    "FomModel",
    "ReducedModel",
    "validate_pattern",
    "galerkin_reduce",
    "reduced_nonlinear_eval",
    "build_fn_model",
    "build_rc_model",
    "simulate",
    "nonlinear_snapshots",
    "param_fun",
    "param_fun_snapshots",
    "approximation_sweep",
    "RC_INPUTS",
]


class Nonlinearity:
    """Componentwise nonlinearity ``f: R^n -> R^n``.

    Subclasses implement ``__call__`` for the full vector, ``reads`` giving
    for each requested row the state indices that component depends on
    (shape ``(len(rows), width)``), and ``at`` evaluating those components
    from the gathered values.
    """

    n = 0

    def __call__(self, x):
        raise NotImplementedError

    def reads(self, rows):
        raise NotImplementedError

    def at(self, rows, vals):
        raise NotImplementedError


class Elementwise(Nonlinearity):
    """``f_i(x) = func(x_i)`` on the rows in ``active`` (all rows by default)."""

    def __init__(self, n, func, active=None):
        self.n = n
        self.func = func
        self.mask = np.ones(n, dtype=bool) if active is None else np.zeros(n, dtype=bool)
        if active is not None:
            self.mask[active] = True

    def __call__(self, x):
        return np.where(self.mask, self.func(x), 0.0)

    def reads(self, rows):
        return np.asarray(rows)[:, None]

    def at(self, rows, vals):
        return np.where(self.mask[rows], self.func(vals[:, 0]), 0.0)


class FitzHughNagumoCubic(Elementwise):
    """``v (v - 0.1) (1 - v)`` on the voltage block, zero on recovery."""

    def __init__(self, n_half):
        super().__init__(2 * n_half, self.cubic, active=np.arange(n_half))

    @staticmethod
    def cubic(v):
        return v * (v - 0.1) * (1.0 - v)


class DiodeLadder(Nonlinearity):
    """Diode currents ``d(v) = exp(40 v) - 1`` of the nonlinear RC ladder.

    Node 1 has a diode to ground and one to node 2; interior nodes see the
    diodes to both neighbours; the last node only the one to its left.
    """

    def __init__(self, n, scale=40.0):
        self.n = n
        self.scale = scale

    def diode(self, v):
        return np.expm1(self.scale * v)

    def __call__(self, x):
        d = self.diode(x[:-1] - x[1:])
        out = np.zeros_like(x)
        out[0] = -self.diode(x[0])
        out[:-1] -= d
        out[1:] += d
        return out

    def reads(self, rows):
        rows = np.asarray(rows)
        return np.clip(rows[:, None] + np.array([-1, 0, 1]), 0, self.n - 1)

    def at(self, rows, vals):
        rows = np.asarray(rows)
        left, mid, right = vals[:, 0], vals[:, 1], vals[:, 2]
        first = rows == 0
        last = rows == self.n - 1
        out = np.where(first, -self.diode(mid), self.diode(left - mid))
        out = out - np.where(last, 0.0, self.diode(mid - right))
        return out


def validate_pattern(nl, rows=None, trials=2, seed=0):
    """Check that components ``rows`` ignore every state entry outside ``reads``.

    Probes with random states; raises ``ValueError`` naming the first row
    whose value changes when an undeclared entry is perturbed.
    """
    n = nl.n
    rows = np.arange(n) if rows is None else np.asarray(rows)
    rng = np.random.default_rng(seed)
    R = nl.reads(rows)
    declared = np.zeros((rows.size, n), dtype=bool)
    declared[np.arange(rows.size)[:, None], R] = True
    for _ in range(trials):
        x = 0.1 * rng.standard_normal(n)
        base = nl(x)[rows]
        y = x.copy()
        y += 0.1 * rng.standard_normal(n)
        # entries each row declares keep their value; everything else moves
        for i, r in enumerate(rows):
            z = y.copy()
            z[R[i]] = x[R[i]]
            if nl(z)[r] != base[i]:
                raise ValueError(f"nonlinearity component {r} reads entries outside its declared pattern")
        if not np.allclose(nl.at(rows, x[R]), base, rtol=1e-13, atol=1e-300):
            raise ValueError("componentwise evaluation disagrees with the full nonlinearity")


def _zero_forcing(t):
    return np.zeros(1)


@dataclass
class FomModel:
    """``E x' = A x + f(x) + B g(t)``.

    ``mass`` may be ``None`` (identity), a dense array or a scipy sparse
    matrix; ``lin`` likewise dense or sparse.
    """

    lin: object
    input_map: np.ndarray
    nonlinearity: Nonlinearity
    forcing: object = _zero_forcing
    mass: object = None
    name: str = "fom"
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.lin.shape[0]

    def nonlinear(self, x):
        return self.nonlinearity(x)


@dataclass
class ReducedModel:
    """Galerkin reduced model, optionally with DEIM for the nonlinearity."""

    basis: np.ndarray
    mass_r: np.ndarray
    lin_r: np.ndarray
    input_r: np.ndarray
    nonlinearity: Nonlinearity
    forcing: object
    deim: object = None
    premultiplier: np.ndarray = None
    sampled_rows: np.ndarray = None
    basis_rows: np.ndarray = None
    gather: np.ndarray = None

    @property
    def dim(self):
        return self.basis.shape[1]

    @property
    def mass(self):
        return self.mass_r

    @property
    def lin(self):
        return self.lin_r

    @property
    def input_map(self):
        return self.input_r

    def nonlinear(self, x_r):
        if self.deim is None:
            V = self.basis
            return V.T @ self.nonlinearity(V @ x_r)
        return reduced_nonlinear_eval(self, x_r)


def _matmul(M, X):
    if M is None:
        return X
    return M @ X


def galerkin_reduce(fom, V, deim=None, ortho_tol=1e-10):
    """Project ``fom`` onto the columns of orthonormal ``V``.

    With a :class:`~deimkit.projector.DeimProjector` the reduced
    nonlinearity becomes ``V^T M f(...)[sel]``: only the rows of ``V`` that
    the selected components read are kept, so each evaluation costs
    ``O(m r)`` plus ``m`` scalar nonlinearity calls.
    """
    V = np.asarray(V, dtype=float)
    r = V.shape[1]
    if np.abs(V.T @ V - np.eye(r)).max() > ortho_tol:
        raise ValueError("V must have orthonormal columns")
    mass_r = V.T @ _matmul(fom.mass, V)
    lin_r = V.T @ (fom.lin @ V)
    input_r = V.T @ np.asarray(fom.input_map, dtype=float)
    rom = ReducedModel(V, np.asarray(mass_r), np.asarray(lin_r), np.asarray(input_r), fom.nonlinearity, fom.forcing)
    if deim is not None:
        rows = deim.selection.indices
        validate_pattern(fom.nonlinearity, rows)
        reads = fom.nonlinearity.reads(rows)
        needed = np.unique(reads)
        rom.deim = deim
        rom.premultiplier = V.T @ deim.interp_matrix
        rom.sampled_rows = needed
        rom.basis_rows = V[needed].copy()
        rom.gather = np.searchsorted(needed, reads)
    return rom


def reduced_nonlinear_eval(rom, x_r):
    """``V^T U (S^T U)^{-1} S^T f(V x_r)`` without forming ``V x_r``."""
    local = rom.basis_rows @ x_r
    vals = rom.nonlinearity.at(rom.deim.selection.indices, local[rom.gather])
    return rom.premultiplier @ vals


def _factor(M):
    if sp.issparse(M):
        lu = spla.splu(sp.csc_matrix(M))
        return lu.solve
    lu = scipy.linalg.lu_factor(np.asarray(M))
    return lambda b: scipy.linalg.lu_solve(lu, b)


def _identity_like(M):
    if sp.issparse(M):
        return sp.identity(M.shape[0], format="csr")
    return np.eye(M.shape[0])


def simulate(model, t_span, n_steps, x0, snapshot_count, capture_nonlinear=False):
    """Fixed-step semi-implicit Euler.

    ``(E - dt A) x_{k+1} = E x_k + dt (f(x_k) + B g(t_k))``: the linear part
    is implicit with a single prefactored solve, nonlinearity and input are
    explicit. Snapshots are recorded at ``t0 + i (t1 - t0) / N`` for
    ``i = 1..N`` using the nearest time step.

    Returns
    -------
    SnapshotSet
        States as columns; with ``capture_nonlinear`` a second SnapshotSet
        of ``f(x)`` at the same instants is returned as well.
    """
    t0, t1 = map(float, t_span)
    if not n_steps >= snapshot_count >= 2:
        raise ValueError("need n_steps >= snapshot_count >= 2")
    dt = (t1 - t0) / n_steps
    E = model.mass if model.mass is not None else _identity_like(model.lin)
    solve = _factor(E - dt * model.lin)
    B = np.asarray(model.input_map, dtype=float)
    capture = np.rint(np.arange(1, snapshot_count + 1) * n_steps / snapshot_count).astype(int)
    times = t0 + capture * dt
    X = np.empty((model.dim, snapshot_count))
    F = np.empty((model.dim, snapshot_count)) if capture_nonlinear else None
    x = np.array(x0, dtype=float)
    slot = 0
    for k in range(n_steps):
        t = t0 + k * dt
        with np.errstate(over="ignore", invalid="ignore"):
            rhs = E @ x + dt * (model.nonlinear(x) + B @ np.atleast_1d(model.forcing(t)))
        if not np.all(np.isfinite(rhs)):
            raise IntegrationError(f"non-finite right-hand side at t = {t:.6g}", t=t)
        x = solve(rhs)
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"non-finite state at t = {t + dt:.6g}", t=t + dt)
        while slot < snapshot_count and capture[slot] == k + 1:
            X[:, slot] = x
            if capture_nonlinear:
                F[:, slot] = model.nonlinear(x)
            slot += 1
    snaps = SnapshotSet(X, times)
    if capture_nonlinear:
        return snaps, SnapshotSet(F, times)
    return snaps


def nonlinear_snapshots(model, snaps):
    """``f`` applied to every state snapshot."""
    F = np.column_stack([model.nonlinear(x) for x in snaps.matrix.T])
    return SnapshotSet(F, snaps.times_or_params)


def fn_stimulus(t):
    return 50000.0 * t**3 * np.exp(-15.0 * t)


def build_fn_model(n_half=1024, length=1.0, eps=0.015, b=0.5, gamma=2.0, c=0.05):
    """FitzHugh-Nagumo cable discretized by central differences.

    Unknowns are ``(v_1..v_N, w_1..w_N)`` on ``N = n_half`` uniform nodes of
    ``[0, length]``. The Neumann data ``v_x(0) = -i0(t)`` and
    ``v_x(length) = 0`` enter through ghost nodes, so the stimulus appears as
    the first input column and the constant ``c`` as the second.
    """
    if n_half < 8:
        raise ValueError("n_half must be >= 8")
    N = n_half
    h = length / (N - 1)
    main = -2.0 * np.ones(N)
    up = np.ones(N - 1)
    lo = np.ones(N - 1)
    up[0] = 2.0
    lo[-1] = 2.0
    D = sp.diags([lo, main, up], [-1, 0, 1]) / h**2
    I = sp.identity(N)
    A = sp.bmat([[eps**2 * D, -I], [b * I, -gamma * I]], format="csr")
    E = sp.diags(np.concatenate([eps * np.ones(N), np.ones(N)]), format="csr")
    B = np.zeros((2 * N, 2))
    B[0, 0] = eps**2 * 2.0 / h
    B[:, 1] = c

    def forcing(t):
        return np.array([fn_stimulus(t), 1.0])

    params = dict(n_half=N, length=length, eps=eps, b=b, gamma=gamma, c=c, h=h)
    return FomModel(A, B, FitzHughNagumoCubic(N), forcing, E, "fitzhugh-nagumo", params)


RC_INPUTS = {
    "exp": lambda t: np.exp(-t),
    "sin50": lambda t: np.sin(2 * np.pi * 50 * t),
    "sin1000": lambda t: np.sin(2 * np.pi * 1000 * t),
}


def build_rc_model(n=1000, input="exp"):
    """Nonlinear RC ladder with unit resistors and capacitors.

    Every branch conducts ``g(v) = exp(40 v) + v - 1``: the linear part
    ``v`` forms ``A`` and the diode part ``exp(40 v) - 1`` the
    nonlinearity. The current source feeds node 1.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    main = -2.0 * np.ones(n)
    main[-1] = -1.0
    off = np.ones(n - 1)
    A = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    u = RC_INPUTS[input] if isinstance(input, str) else input

    def forcing(t):
        return np.array([u(t)])

    return FomModel(A, B, DiodeLadder(n), forcing, None, "rc-ladder", {"n": n, "input": str(input)})


def param_fun(kind, grid, mu):
    """The two parametrized test functions, evaluated on ``grid`` for one ``mu``."""
    grid = np.asarray(grid, dtype=float)
    if kind == "decaying-oscillation":
        return 10.0 * np.exp(-mu * grid) * (np.cos(4 * mu * grid) + np.sin(4 * mu * grid))
    if kind == "sinh-cosh":
        if np.any(grid < 0.1):
            raise ValueError("sinh-cosh needs x >= 0.1")
        with np.errstate(over="ignore"):
            return np.sinh(mu * np.cosh(mu / grid))
    raise ValueError(f"unknown function kind {kind!r}")


PARAM_DOMAINS = {"decaying-oscillation": (1.0, 6.0), "sinh-cosh": (0.1, 6.0)}


def param_fun_snapshots(kind, t_grid, mu_grid):
    """Columns ``f(t_grid; mu)`` for each ``mu``.

    Columns that overflow, either in their entries or in their 2-norm, are
    listed in ``flagged``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    mu_grid = np.asarray(mu_grid, dtype=float)
    if t_grid.size == 0 or mu_grid.size == 0:
        raise ValueError("grids must be non-empty")
    X = np.column_stack([param_fun(kind, t_grid, mu) for mu in mu_grid])
    with np.errstate(over="ignore", invalid="ignore"):
        norms = np.sqrt(np.sum(X * X, axis=0))
    bad = tuple(int(j) for j in np.flatnonzero(~np.isfinite(norms)))
    return SnapshotSet(X, mu_grid, flagged=bad)


def approximation_sweep(U_or_proj, sel=None, kind="decaying-oscillation", t_grid=None, mu_eval_grid=None, return_flags=False):
    """Relative DEIM errors ``||f_mu - f_mu^DEIM|| / ||f_mu||`` over ``mu_eval_grid``.

    Accepts either a prebuilt projector or ``(U, sel)``. Columns with zero
    norm report the absolute error; ``return_flags`` also returns their mask.
    """
    from .projector import DeimProjector, build_projector

    proj = U_or_proj if isinstance(U_or_proj, DeimProjector) else build_projector(U_or_proj, sel)
    mu_eval_grid = np.asarray(mu_eval_grid, dtype=float)
    errs = np.empty(mu_eval_grid.size)
    zero = np.zeros(mu_eval_grid.size, dtype=bool)
    for j, mu in enumerate(mu_eval_grid):
        f = param_fun(kind, t_grid, mu)
        nrm = np.linalg.norm(f)
        d = np.linalg.norm(f - deim_apply(proj, f))
        zero[j] = nrm == 0.0
        errs[j] = d if zero[j] else d / nrm
    return (errs, zero) if return_flags else errs
