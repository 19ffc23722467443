"""Order statistics, Kaplan-Meier weights and empirical step functions.

Everything downstream works on the outcome-sorted view of a sample. Rows are
sorted by ``y``; at tied outcomes uncensored rows come first, then the original
row order decides. With that convention the Kaplan-Meier weights satisfy

    w[i] = delta[i] / (n * (1 - G(y[i]-)))

exactly, where ``G`` is the Kaplan-Meier estimate of the censoring CDF.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


def _as_matrix(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DataError(f"{name} must be 1- or 2-dimensional, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class Sample:
    """Observed data ``(y, delta, x, z)`` for ``n`` units.

    Parameters
    ----------
    y : array of shape (n,)
        Observed follow-up ``min(T, C)``.
    delta : array of shape (n,)
        1 if the outcome is observed, 0 if censored.
    x : array of shape (n, K)
        Regressors, including an intercept column if wanted.
    z : array of shape (n, L)
        Instruments, including exogenous regressors and intercept.
    """

    y: np.ndarray
    delta: np.ndarray
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.ndim != 1:
            raise DataError(f"y must be 1-dimensional, got shape {y.shape}")
        raw_delta = np.asarray(self.delta)
        if raw_delta.shape != y.shape:
            raise DataError(f"delta has shape {raw_delta.shape}, expected {y.shape}")
        bad = ~np.isin(raw_delta, (0, 1))
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataError(f"delta must be 0 or 1; row {row} has {raw_delta[row]!r}")
        delta = raw_delta.astype(np.int8)
        x = _as_matrix(self.x, "x")
        z = _as_matrix(self.z, "z")
        n = y.shape[0]
        for name, a in (("x", x), ("z", z)):
            if a.shape[0] != n:
                raise DataError(f"{name} has {a.shape[0]} rows, expected {n}")
        for name, a in (("y", y), ("x", x), ("z", z)):
            if not np.all(np.isfinite(a)):
                raise DataError(f"{name} contains missing or non-finite values")
        k, l = x.shape[1], z.shape[1]
        if k > l:
            raise DataError(f"need at least as many instruments as regressors (K={k}, L={l})")
        if n < max(k, l) + 1:
            raise DataError(f"n={n} is too small for K={k}, L={l}")
        for name, a in (("y", y), ("delta", delta), ("x", x), ("z", z)):
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1]

    @property
    def l(self) -> int:  # noqa: E743
        return self.z.shape[1]

    @property
    def censoring_fraction(self) -> float:
        return float(1.0 - self.delta.mean())


@dataclass(frozen=True, eq=False)
class SortedSample:
    """A :class:`Sample` reordered by outcome.

    ``perm[i]`` is the original row index of sorted position ``i`` (0-based).
    """

    perm: np.ndarray
    y: np.ndarray
    delta: np.ndarray
    x: np.ndarray
    z: np.ndarray

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def unsort(self) -> Sample:
        """Undo the sort and return the rows in their original order."""
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.n)
        return Sample(self.y[inv], self.delta[inv], self.x[inv], self.z[inv])


@dataclass(frozen=True, eq=False)
class StepCdf:
    """Right-continuous, non-decreasing step function on the real line.

    The function is 0 below ``knots[0]`` and equals ``values[j]`` on
    ``[knots[j], knots[j+1])``.
    """

    knots: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.knots, t, side="right")
        return self._lookup(idx)

    def left(self, t):
        """Left limit ``F(t-)``."""
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.knots, t, side="left")
        return self._lookup(idx)

    def _lookup(self, idx):
        padded = np.concatenate(([0.0], self.values))
        return padded[idx]


def sort_by_outcome(sample: Sample) -> SortedSample:
    """Sort rows by ``y``, uncensored before censored at ties, then by row index."""
    n = sample.n
    perm = np.lexsort((np.arange(n), 1 - sample.delta, sample.y))
    return SortedSample(
        perm=perm,
        y=sample.y[perm],
        delta=sample.delta[perm],
        x=sample.x[perm],
        z=sample.z[perm],
    )


def km_weights(s: SortedSample) -> np.ndarray:
    """Kaplan-Meier (Stute) weights aligned with the sorted rows.

    ``w[i] = delta[i] / (n - i) * prod_{j < i} ((n - j - 1) / (n - j)) ** delta[j]``
    with 0-based ``i``. The full product over ``j < i`` telescopes to
    ``(n - i) / n``, so this equals
    ``delta[i] / n * prod_{j < i, delta[j] = 0} (n - j) / (n - j - 1)``,
    which is what gets computed: only censored rows contribute factors and
    an uncensored sample gets exactly ``1 / n``.
    """
    n = s.n
    remaining = n - np.arange(n, dtype=np.float64)
    # censored row n-1 has a zero denominator but never precedes another row
    inflate = np.ones(n)
    mask = (s.delta == 0) & (remaining > 1.0)
    inflate[mask] = remaining[mask] / (remaining[mask] - 1.0)
    before = np.concatenate(([1.0], np.cumprod(inflate[:-1])))
    return s.delta * before / n


def _step_from_rows(y, row_values, mask):
    # at a tied y the step takes the value after the group's last sorted row
    knots = np.unique(y[mask])
    ends = np.searchsorted(y, knots, side="right") - 1
    return StepCdf(knots=knots, values=row_values[ends])


def km_censoring_cdf(s: SortedSample) -> StepCdf:
    """Kaplan-Meier estimate of the censoring CDF ``G(t) = P(C <= t)``.

    Censored rows are the "events" here, so the estimate jumps only at
    censored outcomes.
    """
    n = s.n
    remaining = n - np.arange(n, dtype=np.float64)
    factors = np.where(s.delta == 0, (remaining - 1.0) / remaining, 1.0)
    cdf = 1.0 - np.cumprod(factors)
    return _step_from_rows(s.y, cdf, s.delta == 0)


def empirical_cdf(s: SortedSample) -> StepCdf:
    """Empirical CDF of the observed outcomes, ``H(t) = #{y <= t} / n``."""
    n = s.n
    return _step_from_rows(s.y, np.arange(1, n + 1) / n, np.ones(n, dtype=bool))
