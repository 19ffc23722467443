"""Kaplan-Meier weighted moments of censored data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import MomentEvaluationError
from .km import SortedSample

MomentFunction = Callable[[np.ndarray, np.ndarray, float], "np.ndarray | float"]


@dataclass(frozen=True, eq=False)
class WeightedGrams:
    """Weighted cross-product matrices shared by both least-squares stages.

    Attributes
    ----------
    szz : (L, L) array
        ``sum_i w_i z_i z_i'``
    szx : (L, K) array
        ``sum_i w_i z_i x_i'``
    szy : (L,) array
        ``sum_i w_i z_i y_i``
    """

    szz: np.ndarray
    szx: np.ndarray
    szy: np.ndarray


def weighted_moment(s: SortedSample, w: np.ndarray, phi: MomentFunction) -> np.ndarray:
    """Estimate ``E[phi(X, Z, T)]`` from censored data.

    Returns ``sum_i w_i * phi(x_i, z_i, y_i)`` over the sorted rows. ``phi``
    is called once per row and may return a scalar or a vector. Rows with
    zero weight are still evaluated, so ``phi`` must be finite everywhere.
    """
    values = []
    for i in range(s.n):
        v = np.atleast_1d(np.asarray(phi(s.x[i], s.z[i], s.y[i]), dtype=np.float64))
        if not np.all(np.isfinite(v)):
            raise MomentEvaluationError(i, v)
        values.append(v)
    return np.asarray(w, dtype=np.float64) @ np.vstack(values)


def weighted_grams(s: SortedSample, w: np.ndarray) -> WeightedGrams:
    zw = s.z * w[:, None]
    szz = zw.T @ s.z
    return WeightedGrams(
        szz=0.5 * (szz + szz.T),
        szx=zw.T @ s.x,
        szy=zw.T @ s.y,
    )
