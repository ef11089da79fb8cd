"""Command line interface: ``deimkit <command> [options]``.

Every command writes its outputs plus ``report.json`` and ``manifest.json``
under ``--out``. Exit codes: 0 success, 2 usage, 3 unreadable input,
4 rank deficiency, 5 row budget exhausted, 6 integration failure,
7 a postcondition (reference threshold) did not hold.
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import BudgetExceededError, IntegrationError, RankDeficientError, SingularMatrixError
from .experiments import (
    METHODS,
    REFERENCE_VALUES,
    PRESETS,
    fn_fom,
    paramfun_experiment,
    random_benchmark,
    rc_fom,
    reduce_fom,
    run_selection,
    threshold_for_preset,
)
from .io import read_matrix, write_json
from .linalg import thin_svd
from .selection import QdeimrConfig, deim_select, qdeim_bound, qdeim_select

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_RANK = 4
EXIT_BUDGET = 5
EXIT_INTEGRATION = 6
EXIT_POSTCONDITION = 7


class PostconditionError(RuntimeError):
    pass


def threads():
    """Worker cap from ``DEIMKIT_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("DEIMKIT_THREADS", "1")))
    except ValueError:
        return 1


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def selection_dict(rep):
    """Selection report without its wall time (which goes to ``timings``)."""
    d = rep.to_dict()
    d.pop("wall_time", None)
    return d


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])


class Run:
    """Collects config, results, files and timings for one command."""

    def __init__(self, command, out, config):
        self.command = command
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.results = {}
        self.files = []
        self.timings = {}
        self.checks = {}
        self._t = time.perf_counter()

    def phase(self, name):
        now = time.perf_counter()
        self.timings[name] = now - self._t
        self._t = now

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def check(self, name, ok):
        self.checks[name] = bool(ok)

    def finish(self):
        report = {
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "files": sorted(self.files),
            "postconditions": self.checks,
            "timings": self.timings,
        }
        write_json(self.out / "report.json", clean(report))
        manifest = {"command": self.command, "report": "report.json", "files": sorted(self.files + ["report.json"]),
                    "version": __version__}
        write_json(self.out / "manifest.json", manifest)
        failed = [k for k, v in self.checks.items() if not v]
        if failed:
            raise PostconditionError("postconditions failed: " + ", ".join(failed))
        return report


def apply_preset(args, command):
    if not getattr(args, "paper_preset", None):
        return
    preset = PRESETS[args.paper_preset]
    if preset["command"] != command:
        raise SystemExit(f"preset {args.paper_preset!r} belongs to {preset['command']}")
    for k, v in preset.items():
        if k != "command":
            setattr(args, k, v)


def qdeimr_config(args):
    return QdeimrConfig(
        window_k=args.window,
        c_threshold=args.threshold,
        sampling=args.sampling,
        seed=args.seed if args.seed is not None else 0,
        max_row_visits=args.budget,
        restart_policy=args.restart_policy,
    )


def cmd_select(args):
    try:
        U = read_matrix(args.matrix_file)
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read {args.matrix_file}: {exc}") from exc
    if args.orthonormalize:
        Z, s, _ = thin_svd(U)
        U = Z[:, : int(np.sum(s > s[0] * U.shape[0] * np.finfo(float).eps))]
    if args.m is not None:
        if not 1 <= args.m <= U.shape[1]:
            raise SystemExit(f"--m must lie in [1, {U.shape[1]}]")
        U = U[:, : args.m]
    n, m = U.shape
    if m > n:
        raise RankDeficientError(f"cannot select {m} rows from {n}")
    config = dict(matrix_file=str(args.matrix_file), method=args.method, n=n, m=m, seed=args.seed,
                  trials=args.trials, orthonormalize=args.orthonormalize)
    cfg = None
    if args.method == "qdeimr":
        cfg = qdeimr_config(args)
        config["qdeimr"] = cfg.resolved(n, m).__dict__
    run = Run("select", args.out, config)
    rep = run_selection(U, args.method, cfg=cfg, seed=args.seed, trials=args.trials, workers=threads())
    run.phase("select")
    if not math.isfinite(rep.c_exact):
        raise RankDeficientError("selected block is singular")
    sel = selection_dict(rep)
    write_json(run.path("selection.json"), clean(sel))
    run.results = sel
    if rep.method == "qdeim":
        run.check("c_within_qdeim_bound", rep.c_exact <= qdeim_bound(n, m) * (1 + 1e-12))
    if rep.method == "qdeimr":
        run.check("c_within_threshold", rep.c_exact <= rep.c_bound_used)
    run.finish()
    print(json.dumps(clean(sel), sort_keys=True))


def cmd_benchmark_random(args):
    apply_preset(args, "benchmark-random")
    if args.m > args.n or args.m < 1:
        raise SystemExit("need 1 <= m <= n")
    config = dict(n=args.n, m=args.m, trials=args.trials, seed=args.seed, preset=args.paper_preset)
    run = Run("benchmark-random", args.out, config)
    c, summary = random_benchmark(args.n, args.m, args.trials, args.seed, workers=threads())
    run.phase("trials")
    write_csv(run.path("trials.csv"), ["trial", "c_deim", "c_qdeim"], [(i + 1, a, b) for i, (a, b) in enumerate(c)])
    write_json(run.path("summary.json"), clean(summary))
    run.results = summary
    run.check("qdeim_within_bound", np.all(c[:, 1] <= qdeim_bound(args.n, args.m) * (1 + 1e-12)))
    if args.paper_preset:
        run.check("all_qdeim_below_sqrt_n", summary["count_qdeim_below_sqrt_n"] == args.trials)
        run.check("median_qdeim_le_median_deim", summary["median_c_qdeim"] <= summary["median_c_deim"])
    run.finish()
    print(json.dumps(clean(summary), sort_keys=True))


def _reduction_outputs(run, data, res):
    run.results.update(
        r=res.r, m=res.m, method=res.method, eps=res.eps, xi1_error=res.xi1_error,
        c=res.selection.c_exact, selection=selection_dict(res.selection),
    )
    rows = [(k + 1, e) for k, e in enumerate(res.rowwise)]
    write_csv(run.path("rowwise_errors.csv"), ["row", "relative_error"], rows)
    sx = data.state_svd[1]
    sf = data.nonlinear_svd[1]
    k = min(sx.size, sf.size)
    write_csv(run.path("singular_values.csv"), ["index", "state", "nonlinear"],
              [(i + 1, sx[i], sf[i]) for i in range(k)])


def _check_band(run, name, value, target, factor):
    if target is not None:
        run.results.setdefault("reference", {})[name] = target
        run.check(f"{name}_within_{factor:g}x_of_reference", target / factor <= value <= target * factor)


def cmd_fn_demo(args):
    apply_preset(args, "fn-demo")
    config = dict(r=args.r, m=args.m, method=args.method, steps=args.steps, n_half=args.n_half, seed=args.seed,
                  t_span=[0.0, 8.0], snapshots=100, preset=args.paper_preset)
    run = Run("fn-demo", args.out, config)
    data = fn_fom(args.n_half, args.steps, 100, 8.0)
    run.phase("full_model")
    res = reduce_fom(data, args.r, args.m, args.method, seed=args.seed)
    run.phase("reduced_model")
    _reduction_outputs(run, data, res)
    if args.paper_preset and args.r == args.m:
        _check_band(run, "eps", res.eps, REFERENCE_VALUES["fn_eps"].get(args.r, {}).get(args.method), 2.0)
    run.finish()
    print(json.dumps(clean({"eps": res.eps, "c": res.selection.c_exact}), sort_keys=True))


def cmd_rc_demo(args):
    apply_preset(args, "rc-demo")
    config = dict(r=args.r, m=args.m, method=args.method, input=args.input, steps=args.steps, n=args.n,
                  seed=args.seed, t_span=[0.0, 7.0], snapshots=1425, preset=args.paper_preset)
    run = Run("rc-demo", args.out, config)
    data = rc_fom(args.n, args.input, args.steps, 1425, 7.0)
    config["steps"] = data.steps
    run.phase("full_model")
    res = reduce_fom(data, args.r, args.m, args.method, seed=args.seed)
    run.phase("reduced_model")
    _reduction_outputs(run, data, res)
    X = data.states.matrix
    write_csv(run.path("xi1.csv"), ["t", "full", "reduced"],
              list(zip(data.states.times_or_params, X[0], res.lifted[0])))
    if args.paper_preset and args.input == "exp":
        _check_band(run, "eps", res.eps, REFERENCE_VALUES["rc_eps"].get(args.r, {}).get(args.method), 3.0)
        _check_band(run, "xi1_error", res.xi1_error, REFERENCE_VALUES["rc_xi1"].get(args.r, {}).get(args.method), 3.0)
    if args.input != "exp":
        U = data.nonlinear_svd[0][:, : args.m]
        same = bool(np.array_equal(np.sort(deim_select(U).indices), np.sort(qdeim_select(U).indices)))
        run.results["deim_qdeim_same_indices"] = same
        if args.paper_preset:
            run.check("deim_qdeim_same_indices", same)
    run.finish()
    print(json.dumps(clean({"eps": res.eps, "xi1_error": res.xi1_error, "c": res.selection.c_exact}), sort_keys=True))


def cmd_paramfun_demo(args):
    apply_preset(args, "paramfun-demo")
    seed = args.seed if args.seed is not None else 0
    methods = ["deim", "qdeim"] + ([args.method] if args.method not in ("deim", "qdeim") else [])
    config = dict(kind=args.kind, m=args.m, method=args.method, methods=methods, eval_points=args.eval_points,
                  threshold_preset=args.threshold_preset, seed=seed, trials=args.trials,
                  preset=args.paper_preset)
    run = Run("paramfun-demo", args.out, config)
    cfg = None
    if args.method == "qdeimr":
        n = 10000 if args.kind == "decaying-oscillation" else 2000
        thr = args.threshold if args.threshold is not None else threshold_for_preset(args.threshold_preset, n, args.m)
        cfg = QdeimrConfig(window_k=args.window, c_threshold=thr, sampling=args.sampling, seed=seed,
                           max_row_visits=args.budget, restart_policy=args.restart_policy)
    mu, out, info = paramfun_experiment(args.kind, args.m, tuple(methods), args.threshold_preset,
                                        args.eval_points, seed, args.trials, cfg=cfg, workers=threads())
    run.phase("experiment")
    config.update(info)
    cols = [out[k][1] for k in methods]
    write_csv(run.path("errors.csv"), ["mu"] + [f"err_{k}" for k in methods],
              [(m_,) + tuple(c[i] for c in cols) for i, m_ in enumerate(mu)])
    res = {}
    for k in methods:
        rep, errs, zero = out[k]
        finite = errs[np.isfinite(errs)]
        res[k] = dict(selection_dict(rep), max_error=float(finite.max()) if finite.size else None,
                      zero_norm_columns=int(zero.sum()), nonfinite_columns=int((~np.isfinite(errs)).sum()))
    run.results = res
    for k in methods:
        run.timings[f"select_{k}"] = out[k][0].wall_time
    if args.method == "qdeimr":
        run.check("qdeimr_c_within_threshold", out["qdeimr"][0].c_exact <= info["threshold"])
    run.finish()
    print(json.dumps(clean({k: {"c": v["c"], "rows_visited": v["rows_visited"], "max_error": v["max_error"]}
                            for k, v in res.items()}), sort_keys=True))


def _add_qdeimr_flags(p):
    p.add_argument("--window", type=int, default=None, help="columns held in the work array (default m)")
    p.add_argument("--threshold", type=float, default=None, help="upper bound for c (default sqrt(m)sqrt(n-m+1))")
    p.add_argument("--sampling", choices=("uniform", "norm-sorted", "norm-weighted"), default="uniform")
    p.add_argument("--budget", type=int, default=None, help="maximal number of rows visited (default n)")
    p.add_argument("--restart-policy", choices=("continue", "restart-pivoting"), default="continue")


def build_parser():
    parser = argparse.ArgumentParser(prog="deimkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"deimkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="select interpolation indices for a basis file")
    p.add_argument("matrix_file")
    p.add_argument("--method", choices=METHODS, default="qdeim")
    p.add_argument("--m", type=int, default=None, help="use the leading m columns")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=10, help="draws for --method random")
    p.add_argument("--orthonormalize", action="store_true", help="replace U by its left singular vectors")
    p.add_argument("--out", default="deimkit-out")
    _add_qdeimr_flags(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("benchmark-random", help="DEIM vs Q-DEIM on Haar random bases")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paper-preset", choices=[k for k, v in PRESETS.items() if v["command"] == "benchmark-random"])
    p.add_argument("--out", default="deimkit-out")
    p.set_defaults(func=cmd_benchmark_random)

    for name, func in (("fn-demo", cmd_fn_demo), ("rc-demo", cmd_rc_demo)):
        p = sub.add_parser(name, help=f"{'FitzHugh-Nagumo' if name == 'fn-demo' else 'RC ladder'} reduction pipeline")
        p.add_argument("--r", type=int, default=5 if name == "fn-demo" else 10)
        p.add_argument("--m", type=int, default=5 if name == "fn-demo" else 10)
        p.add_argument("--method", choices=METHODS, default="qdeim")
        p.add_argument("--steps", type=int, default=16000 if name == "fn-demo" else None)
        p.add_argument("--seed", type=int, default=None)
        if name == "fn-demo":
            p.add_argument("--n-half", type=int, default=1024)
        else:
            p.add_argument("--n", type=int, default=1000)
            p.add_argument("--input", choices=("exp", "sin50", "sin1000"), default="exp")
        p.add_argument("--paper-preset", choices=[k for k, v in PRESETS.items() if v["command"] == name])
        p.add_argument("--out", default="deimkit-out")
        p.set_defaults(func=func)

    p = sub.add_parser("paramfun-demo", help="parametrized function approximation sweep")
    p.add_argument("--kind", choices=("decaying-oscillation", "sinh-cosh"), default="decaying-oscillation")
    p.add_argument("--m", type=int, default=34)
    p.add_argument("--method", choices=METHODS, default="qdeimr")
    p.add_argument("--eval-points", type=int, default=200)
    p.add_argument("--threshold-preset", choices=("default", "loose", "tight"), default="default")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=10)
    _add_qdeimr_flags(p)
    p.add_argument("--paper-preset", choices=[k for k, v in PRESETS.items() if v["command"] == "paramfun-demo"])
    p.add_argument("--out", default="deimkit-out")
    p.set_defaults(func=cmd_paramfun_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(f"deimkit: error: {exc.code}", file=sys.stderr)
            return EXIT_USAGE
        raise
    except OSError as exc:
        print(f"deimkit: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RankDeficientError, SingularMatrixError) as exc:
        print(f"deimkit: rank deficiency: {exc}", file=sys.stderr)
        return EXIT_RANK
    except BudgetExceededError as exc:
        print(f"deimkit: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except IntegrationError as exc:
        echo = {k: v for k, v in vars(args).items() if k != "func"}
        print(f"deimkit: integration failed ({exc}); configuration: {echo}", file=sys.stderr)
        return EXIT_INTEGRATION
    except ValueError as exc:
        print(f"deimkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PostconditionError as exc:
        print(f"deimkit: {exc}", file=sys.stderr)
        return EXIT_POSTCONDITION
    return 0


if __name__ == "__main__":
    sys.exit(main())
