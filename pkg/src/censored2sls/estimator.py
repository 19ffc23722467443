"""Kaplan-Meier weighted two-stage least squares with a plug-in sandwich variance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from .errors import DegenerateSampleError, RankDeficiencyError
from .km import (
    Sample,
    SortedSample,
    StepCdf,
    empirical_cdf,
    km_censoring_cdf,
    km_weights,
    sort_by_outcome,
)
from .moments import WeightedGrams, weighted_grams

RCOND_MIN = 1e-12


def _spd_solve(a, b, name):
    """Solve ``a @ x = b`` for symmetric positive definite ``a`` via Cholesky.

    Raises RankDeficiencyError when the LAPACK reciprocal condition estimate
    falls below ``RCOND_MIN`` or the factorization breaks down.
    """
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise RankDeficiencyError(name, float("nan"))
    c, info = linalg.lapack.dpotrf(a, lower=False, clean=True)
    if info != 0:
        raise RankDeficiencyError(name, 0.0)
    anorm = np.abs(a).sum(axis=0).max()
    if anorm == 0.0:
        raise RankDeficiencyError(name, 0.0)
    rcond, info = linalg.lapack.dpocon(c, anorm, uplo="U")
    if info != 0 or not rcond > RCOND_MIN:
        raise RankDeficiencyError(name, float(rcond))
    return linalg.cho_solve((c, False), b)


def first_stage(g: WeightedGrams) -> np.ndarray:
    """Weighted regression of X on Z: ``Gamma = Szz^{-1} Szx``, shape (L, K)."""
    return _spd_solve(g.szz, g.szx, "Szz")


def _projected_gram(g, gamma):
    m = gamma.T @ g.szz @ gamma
    return 0.5 * (m + m.T)


def second_stage(g: WeightedGrams, gamma: np.ndarray) -> np.ndarray:
    """Weighted regression of Y on the fitted ``Z Gamma``; returns beta (K,)."""
    return _spd_solve(_projected_gram(g, gamma), gamma.T @ g.szy, "Gamma' Szz Gamma")


@dataclass(frozen=True, eq=False)
class InfluenceComponents:
    """Pieces of the plug-in asymptotic variance.

    Attributes
    ----------
    psi : (n, L) array
        Estimated influence values, one row per sorted observation.
    gamma1, gamma2 : (n, L) arrays
        The two censoring correction terms evaluated at each sorted ``y``.
    sigma_psi : (L, L) array
        ``psi' psi / n``.
    w_hat : (K, L) array
        ``(Gamma' Szz Gamma)^{-1} Gamma'``.
    """

    psi: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    sigma_psi: np.ndarray
    w_hat: np.ndarray


def influence_components(
    s: SortedSample,
    w: np.ndarray,
    ghat: StepCdf,
    hhat: StepCdf,
    fit_beta: np.ndarray,
    g: WeightedGrams,
    gamma: np.ndarray,
) -> InfluenceComponents:
    """Estimate the influence function of the weighted moment ``sum w z u``.

    For each instrument ``l`` and sorted row ``i`` (with ``u = y - x'beta``,
    ``S_G = 1 - G`` and ``S_H = 1 - H``)::

        a[i]      = delta[i] z[i,l] u[i] / S_G(y[i]-)
        gamma1(t) = sum_{i: y[i] > t} a[i] / (n S_H(t))
        gamma2(t) = sum_{j: y[j] < t} (1 - delta[j]) / S_H(y[j])**2
                        * sum_{i: y[i] > y[j]} a[i] / n**2
        psi[i]    = a[i] + (1 - delta[i]) gamma1(y[i]) - gamma2(y[i])

    Both double sums are evaluated with tail and prefix sums in O(n log n).
    Terms whose ``S_H`` denominator is zero have an empty inner sum and
    are set to zero. ``w`` is accepted for interface symmetry; the weights
    enter through ``ghat``.
    """
    n = s.n
    y = s.y
    u = y - s.x @ fit_beta
    surv_g = 1.0 - ghat.left(y)
    a = (s.delta * u / surv_g)[:, None] * s.z

    # tail[k] = sum of a over sorted rows k.. n-1
    tail = np.vstack([np.cumsum(a[::-1], axis=0)[::-1], np.zeros((1, a.shape[1]))])
    above = tail[np.searchsorted(y, y, side="right")]

    surv_h = 1.0 - hhat(y)
    safe = surv_h > 0.0
    inv_h = np.zeros(n)
    inv_h[safe] = 1.0 / surv_h[safe]

    gamma1 = above * (inv_h / n)[:, None]
    terms = above * ((1 - s.delta) * inv_h**2)[:, None]
    head = np.vstack([np.zeros((1, a.shape[1])), np.cumsum(terms, axis=0)])
    gamma2 = head[np.searchsorted(y, y, side="left")] / n**2

    psi = a + (1 - s.delta)[:, None] * gamma1 - gamma2
    sigma_psi = psi.T @ psi / n
    sigma_psi = 0.5 * (sigma_psi + sigma_psi.T)
    w_hat = _spd_solve(_projected_gram(g, gamma), gamma.T, "Gamma' Szz Gamma")
    return InfluenceComponents(
        psi=psi, gamma1=gamma1, gamma2=gamma2, sigma_psi=sigma_psi, w_hat=w_hat
    )


@dataclass(frozen=True, eq=False)
class TwoSlsFit:
    """Result of :func:`fit`.

    ``residuals`` are in outcome-sorted order; ``sigma`` is the asymptotic
    covariance of ``sqrt(n) (beta - beta0)``, so ``se = sqrt(diag(sigma) / n)``.
    ``ci`` has shape (K, 2).
    """

    beta: np.ndarray
    residuals: np.ndarray
    sigma: np.ndarray
    se: np.ndarray
    ci: np.ndarray
    alpha: float
    n: int
    weights: np.ndarray
    censoring_fraction: float
    influence: InfluenceComponents

    @property
    def weight_sum(self) -> float:
        return float(self.weights.sum())

    @property
    def zstat(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.beta / self.se

    @property
    def pvalues(self) -> np.ndarray:
        return 2.0 * stats.norm.sf(np.abs(self.zstat))


def fit(sample: Sample, alpha: float = 0.05) -> TwoSlsFit:
    """Fit the censored-outcome 2SLS estimator and its normal-theory intervals."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not sample.delta.any():
        raise DegenerateSampleError("every outcome is censored; nothing to estimate")

    s = sort_by_outcome(sample)
    w = km_weights(s)
    g = weighted_grams(s, w)
    gamma = first_stage(g)
    beta = second_stage(g, gamma)
    infl = influence_components(s, w, km_censoring_cdf(s), empirical_cdf(s), beta, g, gamma)

    sigma = infl.w_hat @ infl.sigma_psi @ infl.w_hat.T
    sigma = 0.5 * (sigma + sigma.T)
    se = np.sqrt(np.clip(np.diag(sigma), 0.0, None) / s.n)
    q = stats.norm.ppf(1.0 - alpha / 2.0)
    ci = np.column_stack([beta - q * se, beta + q * se])
    return TwoSlsFit(
        beta=beta,
        residuals=s.y - s.x @ beta,
        sigma=sigma,
        se=se,
        ci=ci,
        alpha=alpha,
        n=s.n,
        weights=w,
        censoring_fraction=sample.censoring_fraction,
        influence=infl,
    )
