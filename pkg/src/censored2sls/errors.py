"""Exception types raised by the estimator and its front-ends."""

import numpy as np


class DataError(ValueError):
    """Input data violates a structural requirement (shape, values, columns)."""


class DegenerateSampleError(DataError):
    """The sample carries no usable information, e.g. every outcome censored."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """A matrix that must be inverted is singular or badly conditioned.

    Attributes
    ----------
    matrix : str
        Name of the offending matrix.
    rcond : float
        Reciprocal condition number that triggered the error.
    """

    def __init__(self, matrix, rcond):
        self.matrix = matrix
        self.rcond = rcond
        super().__init__(
            f"{matrix} is singular or ill-conditioned (rcond={rcond:.3g}); "
            "instruments may be weak or collinear"
        )


class MomentEvaluationError(ValueError):
    """A moment function returned a non-finite value."""

    def __init__(self, row, value):
        self.row = row
        super().__init__(f"moment function is not finite at sorted row {row}: {value!r}")
