"""Exception types raised across deimkit."""

import numpy as np


class NonFiniteError(ValueError):
    """Input contains NaN or Inf."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A triangular or square system is exactly singular.

    ``index`` is the zero-based position of the offending pivot.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class RankDeficientError(np.linalg.LinAlgError):
    """A basis that must have full column rank does not."""


class BudgetExceededError(RuntimeError):
    """Q-DEIMr ran out of rows before accepting ``m`` pivots.

    ``report`` holds the partial :class:`~deimkit.selection.SelectionReport`.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IntegrationError(RuntimeError):
    """Time stepping produced a non-finite state at time ``t``."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t
