"""Numerical tolerances shared by every module."""

import numpy as np

EPS = float(np.finfo(float).eps)

# pivot ties within this relative margin go to the smallest index
TIE_RTOL = 1e-13

# trailing-norm downdate: recompute once (new/reference)**2 drops below this
NORM_RECOMPUTE = np.sqrt(EPS)

# one-sided Jacobi
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 30

# rank test for Q-DEIM: |T_mm| < n * eps * |T_11|
def rank_tol(n):
    return n * EPS

# brute-force volume search refuses more candidates than this
MAX_BRUTE_FORCE = 10**6

# default relative tail energy for POD truncation
POD_ENERGY_TOL = 1e-8
