"""Two-stage least squares for a randomly right-censored outcome.

Both least-squares stages are weighted by Kaplan-Meier (inverse probability
of censoring) weights; standard errors come from a plug-in estimate of the
influence function of the weighted moments.
"""

from .errors import DataError, DegenerateSampleError, MomentEvaluationError, RankDeficiencyError
from .estimator import (
    InfluenceComponents,
    TwoSlsFit,
    first_stage,
    fit,
    influence_components,
    second_stage,
)
from .km import (
    Sample,
    SortedSample,
    StepCdf,
    empirical_cdf,
    km_censoring_cdf,
    km_weights,
    sort_by_outcome,
)
from .moments import WeightedGrams, weighted_grams, weighted_moment

__all__ = [
    "DataError",
    "DegenerateSampleError",
    "InfluenceComponents",
    "MomentEvaluationError",
    "RankDeficiencyError",
    "Sample",
    "SortedSample",
    "StepCdf",
    "TwoSlsFit",
    "WeightedGrams",
    "empirical_cdf",
    "first_stage",
    "fit",
    "influence_components",
    "km_censoring_cdf",
    "km_weights",
    "second_stage",
    "sort_by_outcome",
    "weighted_grams",
    "weighted_moment",
]
