"""
POD-DEIM reduction of the FitzHugh-Nagumo cable.

1. simulate the full model (2 * n_half unknowns) and collect 100 state and
   nonlinear snapshots on [0, 8],
2. build POD bases for both,
3. pick interpolation rows with DEIM and Q-DEIM,
4. simulate the reduced models and compare against the full trajectory.

The default n_half = 256 runs in well under a minute; pass 1024 for the
full size discretization.

Run:  python demos/fitzhugh_nagumo.py [n_half]
"""

import sys

import numpy as np

from deimkit.experiments import fn_fom, reduce_fom
from deimkit.selection import condition_number, qdeim_select

n_half = int(sys.argv[1]) if len(sys.argv) > 1 else 256

# %% full model
data = fn_fom(n_half, 16000, 100, 8.0)
X = data.states.matrix
v = X[:n_half]
print(f"full model: {X.shape[0]} unknowns, voltage range [{v.min():.3f}, {v.max():.3f}]")

sx, sf = data.state_svd[1], data.nonlinear_svd[1]
print("leading singular values (state):     ", " ".join(f"{x:.2e}" for x in sx[:6] / sx[0]))
print("leading singular values (nonlinear): ", " ".join(f"{x:.2e}" for x in sf[:6] / sf[0]))

# %% condition of the full nonlinear basis
U = data.nonlinear_svd[0]
print(f"Q-DEIM on all {U.shape[1]} nonlinear modes: c = {condition_number(U, qdeim_select(U)):.4g}")

# %% reduced models, r = m
print(f"\n{'r=m':>4s}{'eps DEIM':>14s}{'eps Q-DEIM':>14s}{'c DEIM':>10s}{'c Q-DEIM':>10s}")
for r in (3, 4, 5, 6, 7):
    a = reduce_fom(data, r, r, "deim")
    b = reduce_fom(data, r, r, "qdeim")
    print(f"{r:4d}{a.eps:14.4e}{b.eps:14.4e}{a.selection.c_exact:10.3g}{b.selection.c_exact:10.3g}")

# %% where the reduced model is worst
res = reduce_fom(data, 5, 5, "qdeim")
worst = np.argsort(res.rowwise)[-3:][::-1]
print("\nworst rows (r=m=5, Q-DEIM):", ", ".join(f"{i} ({res.rowwise[i]:.2e})" for i in worst))
