"""
DEIM versus Q-DEIM on random orthonormal bases.

Draws Haar distributed n x m matrices, selects m rows with the greedy
DEIM rule and with column-pivoted QR of U^T, and compares the condition
numbers c = ||(S^T U)^{-1}||_2 of the two choices.

Run:  python demos/random_bases.py [n] [m] [trials]
"""

import math
import sys

import numpy as np

from deimkit.experiments import random_benchmark
from deimkit.selection import qdeim_bound

args = [int(a) for a in sys.argv[1:4]]
n, m, trials = args + [2000, 50, 50][len(args):]

# %% per-trial seeds come from one master seed, so the run is reproducible
c, summary = random_benchmark(n, m, trials, seed=0)

print(f"{trials} Haar bases of size {n} x {m}")
print(f"{'':10s}{'median c':>12s}{'max c':>12s}")
print(f"{'DEIM':10s}{np.median(c[:, 0]):12.4g}{c[:, 0].max():12.4g}")
print(f"{'Q-DEIM':10s}{np.median(c[:, 1]):12.4g}{c[:, 1].max():12.4g}")

# %% the worst case bound is astronomically pessimistic; sqrt(n) is typical
print(f"sqrt(n) = {math.sqrt(n):.4g}, Q-DEIM worst-case bound = {qdeim_bound(n, m):.4g}")
print(f"Q-DEIM below sqrt(n) in {summary['count_qdeim_below_sqrt_n']} of {trials} trials")
print(f"Q-DEIM better than DEIM in {int(np.sum(c[:, 1] < c[:, 0]))} of {trials} trials")
