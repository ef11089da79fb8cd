"""
Restricted Q-DEIM on a parametrized function.

f(t; mu) = 10 exp(-mu t) (cos(4 mu t) + sin(4 mu t)) on 10000 points of
[1, 6], 40 training values of mu in [0, pi]. Q-DEIMr streams rows of the
POD basis through a small work array and stops as soon as the incremental
condition estimate drops below a threshold; tighter thresholds cost more
rows and buy a smaller c.

Run:  python demos/qdeimr_sweep.py
"""

import numpy as np

from deimkit.experiments import paramfun_experiment

m = 34
print(f"{'threshold':>10s}{'bound':>10s}{'rows':>7s}{'c':>10s}{'max err':>11s}")
for preset in ("loose", "default", "tight"):
    mu, out, info = paramfun_experiment(m=m, methods=("qdeimr",), threshold_preset=preset)
    rep, errs, _ = out["qdeimr"]
    print(f"{preset:>10s}{info['threshold']:10.4g}{rep.rows_visited:7d}{rep.c_exact:10.4g}{errs.max():11.3e}")

# %% reference selections see all 10000 rows
mu, out, info = paramfun_experiment(m=m, methods=("deim", "qdeim"))
for k in ("deim", "qdeim"):
    rep, errs, _ = out[k]
    print(f"{k:>10s}{'':10s}{rep.rows_visited:7d}{rep.c_exact:10.4g}{errs.max():11.3e}")
print(f"sigma_m / sigma_1 = {info['sigma_ratio']:.2e}")

# %% error curve at a few parameters
_, out, _ = paramfun_experiment(m=m, methods=("qdeimr",), eval_points=9)
for mu_, e in zip(np.linspace(0, np.pi, 9), out["qdeimr"][1]):
    print(f"mu = {mu_:.3f}   relative error {e:.2e}")
