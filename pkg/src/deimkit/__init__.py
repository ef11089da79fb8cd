"""Interpolation index selection (DEIM, Q-DEIM, Q-DEIMr), oblique DEIM
projectors, POD and Galerkin/DEIM model reduction."""

from .exceptions import (
    BudgetExceededError,
    IntegrationError,
    NonFiniteError,
    RankDeficientError,
    SingularMatrixError,
)
from .linalg import (
    PivotedQrFactor,
    haar_orthonormal,
    ice_append,
    qr_column_pivoted,
    smallest_singular_value,
    solve_upper_triangular,
    thin_svd,
)
from .mor import (
    FomModel,
    ReducedModel,
    approximation_sweep,
    build_fn_model,
    build_rc_model,
    galerkin_reduce,
    param_fun_snapshots,
    reduced_nonlinear_eval,
    simulate,
)
from .pod import PodBasis, SnapshotSet, pod_basis, reconstruction_error, rowwise_relative_errors
from .projector import DeimProjector, apply, build_projector, error_split
from .selection import (
    QdeimrConfig,
    SelectionOperator,
    SelectionReport,
    brute_force_volume_select,
    condition_number,
    deim_select,
    lu_pp_select,
    qdeim_select,
    qdeimr_select,
    random_select,
    refine_volume,
)

__version__ = "0.1.0"
