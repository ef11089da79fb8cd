"""End-to-end pipelines behind the CLI, the demos and the acceptance tests.

Full order simulations and their SVDs are cached per configuration, so
sweeping over ``r``, ``m`` and the selection method only pays for them once.
"""

import functools
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import haar_orthonormal, thin_svd
from .mor import (
    PARAM_DOMAINS,
    approximation_sweep,
    build_fn_model,
    build_rc_model,
    galerkin_reduce,
    param_fun_snapshots,
    simulate,
)
from .pod import pod_basis, rowwise_relative_errors
from .projector import build_projector
from .selection import (
    QdeimrConfig,
    SelectionReport,
    brute_force_volume_select,
    condition_number,
    deim_select,
    lu_pp_select,
    qdeim_bound,
    qdeim_select,
    qdeimr_select,
    random_select,
    volume_bound,
)

__all__ = [
    "METHODS",
    "run_selection",
    "FomData",
    "fn_fom",
    "rc_fom",
    "ReductionResult",
    "reduce_fom",
    "paramfun_basis",
    "threshold_for_preset",
    "paramfun_experiment",
    "random_benchmark",
    "REFERENCE_VALUES",
    "PRESETS",
]

METHODS = ("deim", "qdeim", "qdeimr", "lu", "random", "volume")

# published reference values, used for reporting only
REFERENCE_VALUES = {
    "fn_eps": {
        4: {"deim": 4.291788e-2, "qdeim": 3.446203e-2},
        5: {"deim": 3.500673e-2, "qdeim": 3.467286e-2},
        6: {"deim": 3.300680e-2, "qdeim": 3.260097e-2},
        7: {"deim": 2.998979e-2, "qdeim": 3.010827e-2},
    },
    "fn_qdeim_c": 2.6878e1,
    "rc_eps": {10: {"deim": 8.603826e-3, "qdeim": 6.07172e-3}, 20: {"deim": 1.970500e-4, "qdeim": 1.931018e-4}},
    "rc_xi1": {10: {"deim": 1.28183e-4, "qdeim": 7.783045e-5}, 20: {"deim": 3.209967e-5, "qdeim": 3.238549e-5}},
    "ex31": {"qdeimr_rows": 113, "qdeimr_c": 181.45, "deim_c": 79.13, "loose": (53, 2532.9), "tight": (220, 103.1)},
}

# experiment presets pinning every stated parameter
PRESETS = {
    "fn5": {"command": "fn-demo", "r": 5, "m": 5, "method": "qdeim", "steps": 16000},
    "fn4": {"command": "fn-demo", "r": 4, "m": 4, "method": "qdeim", "steps": 16000},
    "fn6": {"command": "fn-demo", "r": 6, "m": 6, "method": "qdeim", "steps": 16000},
    "fn7": {"command": "fn-demo", "r": 7, "m": 7, "method": "qdeim", "steps": 16000},
    "rc10": {"command": "rc-demo", "r": 10, "m": 10, "method": "qdeim", "input": "exp", "steps": 14000},
    "rc20": {"command": "rc-demo", "r": 20, "m": 20, "method": "qdeim", "input": "exp", "steps": 14000},
    "rc-sin50": {"command": "rc-demo", "r": 5, "m": 5, "method": "qdeim", "input": "sin50", "steps": 14000},
    "rc-sin1000": {"command": "rc-demo", "r": 5, "m": 5, "method": "qdeim", "input": "sin1000", "steps": 140000},
    "ex31": {"command": "paramfun-demo", "kind": "decaying-oscillation", "m": 34, "method": "qdeimr",
             "threshold_preset": "default", "eval_points": 200, "seed": 0},
    "ex31-loose": {"command": "paramfun-demo", "kind": "decaying-oscillation", "m": 34, "method": "qdeimr",
                   "threshold_preset": "loose", "eval_points": 200, "seed": 0},
    "ex31-tight": {"command": "paramfun-demo", "kind": "decaying-oscillation", "m": 34, "method": "qdeimr",
                   "threshold_preset": "tight", "eval_points": 200, "seed": 0},
    "rem33-sinh": {"command": "paramfun-demo", "kind": "sinh-cosh", "m": 11, "method": "random",
                   "threshold_preset": "default", "eval_points": 200, "seed": 0},
    "ex22": {"command": "benchmark-random", "n": 10000, "m": 100, "trials": 200, "seed": 0},
    "ex22-desk": {"command": "benchmark-random", "n": 2000, "m": 50, "trials": 50, "seed": 0},
}


def run_selection(U, method, cfg=None, seed=None, trials=10, workers=1):
    """Run one selection method and report it uniformly.

    ``cfg`` only matters for ``qdeimr``; ``seed`` and ``trials`` for
    ``random`` (and override ``cfg.seed`` for ``qdeimr`` when given).
    """
    U = np.asarray(U, dtype=float)
    n, m = U.shape
    if method == "qdeimr":
        cfg = cfg or QdeimrConfig()
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        rep = qdeimr_select(U, cfg, workers=workers)
        rep.method = "qdeimr"
        rep.seed = int(cfg.seed)
        return rep
    t0 = time.perf_counter()
    bound = None
    visited = n
    extra = {}
    if method == "deim":
        sel = deim_select(U)
    elif method == "qdeim":
        sel = qdeim_select(U)
        bound = qdeim_bound(n, m)
    elif method == "lu":
        sel = lu_pp_select(U)
    elif method == "random":
        sel = random_select(U, trials=trials, seed=seed)
        visited = min(n, m * trials)
        extra["trials"] = int(trials)
    elif method == "volume":
        sel = brute_force_volume_select(U)
        bound = volume_bound(n, m)
    else:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    c = condition_number(U, sel)
    wall = time.perf_counter() - t0
    return SelectionReport(sel, c, bound, visited, 0, wall, method, seed, extra)


@dataclass
class FomData:
    """A full order simulation with the SVDs of its snapshot matrices."""

    model: object
    states: object
    nonlinear: object
    state_svd: tuple
    nonlinear_svd: tuple
    t_span: tuple
    steps: int
    config: dict = field(default_factory=dict)


@functools.lru_cache(maxsize=4)
def fn_fom(n_half=1024, steps=16000, snapshots=100, t_end=8.0):
    """FitzHugh-Nagumo simulation from rest over ``[0, t_end]``.

    The nonlinear basis is computed without deflation: all 100 of its
    columns are used, including the roundoff-level ones.
    """
    model = build_fn_model(n_half)
    X, F = simulate(model, (0.0, t_end), steps, np.zeros(model.dim), snapshots, capture_nonlinear=True)
    Zx, sx, _ = thin_svd(X.matrix)
    Zf, sf, _ = thin_svd(F.matrix, deflate=False)
    cfg = dict(model="fitzhugh-nagumo", n_half=n_half, n=model.dim, steps=steps, snapshots=snapshots, t_end=t_end)
    return FomData(model, X, F, (Zx, sx), (Zf, sf), (0.0, t_end), steps, cfg)


RC_DEFAULT_STEPS = {"exp": 14000, "sin50": 14000, "sin1000": 140000}


@functools.lru_cache(maxsize=4)
def rc_fom(n=1000, input="exp", steps=None, snapshots=1425, t_end=7.0):
    """RC ladder simulation from a discharged state over ``[0, t_end]``."""
    steps = RC_DEFAULT_STEPS.get(input, 14000) if steps is None else steps
    model = build_rc_model(n, input)
    X, F = simulate(model, (0.0, t_end), steps, np.zeros(n), snapshots, capture_nonlinear=True)
    Zx, sx, _ = thin_svd(X.matrix)
    Zf, sf, _ = thin_svd(F.matrix)
    cfg = dict(model="rc-ladder", n=n, input=input, steps=steps, snapshots=snapshots, t_end=t_end)
    return FomData(model, X, F, (Zx, sx), (Zf, sf), (0.0, t_end), steps, cfg)


@dataclass
class ReductionResult:
    r: int
    m: int
    method: str
    selection: SelectionReport
    eps: float
    rowwise: np.ndarray
    lifted: np.ndarray
    times: np.ndarray
    xi1_error: float
    wall_time: float


def reduce_fom(data, r, m, method="qdeim", cfg=None, seed=None, trials=10):
    """POD-Galerkin reduction with DEIM, simulated on the full model's grid.

    Returns the relative Frobenius error of the lifted reduced snapshots,
    the row-wise relative errors and the relative error of the first state
    component over time.
    """
    Zx, sx = data.state_svd
    Zf, sf = data.nonlinear_svd
    rank_x = int(np.sum(sx > 0))
    if not 1 <= r <= rank_x or not 1 <= m <= Zf.shape[1]:
        raise ValueError(f"r={r}, m={m} exceed the snapshot ranks ({rank_x}, {Zf.shape[1]})")
    t0 = time.perf_counter()
    V = Zx[:, :r]
    U = Zf[:, :m]
    rep = run_selection(U, method, cfg=cfg, seed=seed, trials=trials)
    proj = build_projector(U, rep.selection)
    rom = galerkin_reduce(data.model, V, proj)
    Xr = simulate(rom, data.t_span, data.steps, np.zeros(r), data.states.matrix.shape[1])
    X = data.states.matrix
    L = V @ Xr.matrix
    eps = float(np.linalg.norm(X - L) / np.linalg.norm(X))
    rowwise = rowwise_relative_errors(X, L)
    xi1 = float(np.linalg.norm(X[0] - L[0]) / np.linalg.norm(X[0]))
    return ReductionResult(r, m, method, rep, eps, rowwise, L, Xr.times_or_params, xi1, time.perf_counter() - t0)


def paramfun_grid(kind, n):
    lo, hi = PARAM_DOMAINS[kind]
    return np.linspace(lo, hi, n)


@functools.lru_cache(maxsize=4)
def paramfun_basis(kind="decaying-oscillation", n=10000, n_mu=40, m=34, normalize=None):
    """POD basis of ``m`` columns for a parametrized function.

    Columns that overflow are dropped before the SVD. With ``normalize``
    (default for sinh-cosh, whose columns span ~150 orders of magnitude)
    every snapshot is scaled to unit norm first.
    """
    normalize = kind == "sinh-cosh" if normalize is None else normalize
    t = paramfun_grid(kind, n)
    snaps = param_fun_snapshots(kind, t, np.linspace(0.0, np.pi, n_mu))
    X = snaps.drop_flagged().matrix
    if normalize:
        nrm = np.linalg.norm(X, axis=0)
        X = X[:, nrm > 0] / nrm[nrm > 0]
    if m > X.shape[1]:
        raise ValueError(f"m={m} exceeds the {X.shape[1]} usable snapshots")
    basis = pod_basis(X, rank=m)
    return basis.vectors, basis.singular_values, t, snaps.flagged


def threshold_for_preset(preset, n, m):
    """Upper bound for c used by Q-DEIMr under the named preset."""
    base = math.sqrt(m) * math.sqrt(n - m + 1)
    if preset == "default":
        return base
    if preset == "loose":
        return m * math.sqrt(n - m + 1)
    if preset == "tight":
        return base / 5.0
    raise ValueError(f"unknown threshold preset {preset!r}")


def paramfun_experiment(kind="decaying-oscillation", m=34, methods=("deim", "qdeim", "qdeimr"),
                        threshold_preset="default", eval_points=200, seed=0, trials=10, n=None,
                        n_mu=None, cfg=None, workers=1):
    """Selections for a parametrized-function basis and their error sweeps.

    Returns ``(mu_eval, {method: (SelectionReport, errors, zero_flags)}, info)``.
    """
    n = (10000 if kind == "decaying-oscillation" else 2000) if n is None else n
    # sinh-cosh overflows for mu above ~0.7, so sample mu more densely
    n_mu = (40 if kind == "decaying-oscillation" else 160) if n_mu is None else n_mu
    U, sigma, t, flagged = paramfun_basis(kind, n, n_mu, m)
    mu_eval = np.linspace(0.0, np.pi, eval_points)
    threshold = threshold_for_preset(threshold_preset, n, m)
    out = {}
    for method in methods:
        qcfg = None
        if method == "qdeimr":
            qcfg = cfg or QdeimrConfig(c_threshold=threshold, seed=seed)
        rep = run_selection(U, method, cfg=qcfg, seed=seed, trials=trials, workers=workers)
        proj = build_projector(U, rep.selection)
        with np.errstate(over="ignore", invalid="ignore"):
            errs, zero = approximation_sweep(proj, kind=kind, t_grid=t, mu_eval_grid=mu_eval, return_flags=True)
        out[method] = (rep, errs, zero)
    info = dict(kind=kind, n=n, m=m, n_mu=n_mu, threshold=threshold, threshold_preset=threshold_preset,
                flagged_snapshots=list(flagged), sigma_ratio=float(sigma[m - 1] / sigma[0]))
    return mu_eval, out, info


def _benchmark_trial(n, m, seed_seq):
    U = haar_orthonormal(n, m, np.random.default_rng(seed_seq))
    return condition_number(U, deim_select(U)), condition_number(U, qdeim_select(U))


def random_benchmark(n=2000, m=50, trials=50, seed=0, workers=1):
    """DEIM and Q-DEIM condition numbers on Haar distributed bases.

    Each trial draws from its own child of ``SeedSequence(seed)``, so the
    output does not depend on ``workers``.
    """
    if m > n:
        raise ValueError(f"need n >= m, got n={n}, m={m}")
    seqs = np.random.SeedSequence(seed).spawn(trials)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda s: _benchmark_trial(n, m, s), seqs))
    else:
        rows = [_benchmark_trial(n, m, s) for s in seqs]
    c = np.array(rows, dtype=float).reshape(trials, 2)
    summary = {
        "n": n,
        "m": m,
        "trials": trials,
        "seed": seed,
        "sqrt_n": math.sqrt(n),
        "count_qdeim_below_sqrt_n": int(np.sum(c[:, 1] < math.sqrt(n))),
        "max_c_qdeim": float(c[:, 1].max()),
        "median_c_deim": float(np.median(c[:, 0])),
        "median_c_qdeim": float(np.median(c[:, 1])),
        "max_c_deim": float(c[:, 0].max()),
    }
    return c, summary
