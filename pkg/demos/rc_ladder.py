"""
Nonlinear RC ladder: POD-DEIM with an exponential and a sinusoidal input.

The exponential input drives a smooth transient; the reduced model tracks
the voltage at the first node. With sinusoidal forcing the nonlinear
snapshots are dominated by a few sharply localized modes, and DEIM and
Q-DEIM end up choosing the same rows.

Run:  python demos/rc_ladder.py [n]
"""

import sys

import numpy as np

from deimkit import deim_select, qdeim_select
from deimkit.experiments import rc_fom, reduce_fom

n = int(sys.argv[1]) if len(sys.argv) > 1 else 300

# %% exponential input
data = rc_fom(n, "exp")
print(f"RC ladder, n = {n}, {data.steps} steps on [0, 7], {data.states.matrix.shape[1]} snapshots")
print(f"{'r=m':>4s}{'method':>8s}{'eps':>12s}{'xi1 error':>12s}{'c':>10s}")
for r in (5, 10, 20):
    for k in ("deim", "qdeim"):
        res = reduce_fom(data, r, r, k)
        print(f"{r:4d}{k:>8s}{res.eps:12.3e}{res.xi1_error:12.3e}{res.selection.c_exact:10.3g}")

# %% first node voltage, a few samples
res = reduce_fom(data, 10, 10, "qdeim")
t = data.states.times_or_params
for j in np.linspace(0, t.size - 1, 6).astype(int):
    print(f"t = {t[j]:5.2f}   full {data.states.matrix[0, j]: .6f}   reduced {res.lifted[0, j]: .6f}")

# %% sinusoidal input
U = rc_fom(n, "sin50").nonlinear_svd[0][:, :5]
a, b = deim_select(U).indices, qdeim_select(U).indices
print("\nsin50 input, m = 5")
print("  DEIM rows:  ", sorted(a.tolist()))
print("  Q-DEIM rows:", sorted(b.tolist()))
