"""Monte Carlo study of the estimator under a fixed data-generating process.

The design::

    Z2, X3, V, E ~ Uniform[-1, 1] independent
    X2 = Z2 + V,  U = V + E
    T  = 0.5 + X2 + X3 + U
    C  = rho + Exp(1)   (rho = 0 when not given)

with regressors ``X = (1, X2, X3)`` and instruments ``Z = (1, Z2, X3)``,
so the true coefficient vector is ``(0.5, 1, 1)``.

Each replication draws from its own substream keyed by ``(seed, rep_index)``,
so results do not depend on how replications are scheduled.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .errors import DataError
from .estimator import fit
from .km import Sample

logger = logging.getLogger(__name__)

BETA0 = np.array([0.5, 1.0, 1.0])
MAX_FAILED_FRACTION = 0.05


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DgpConfig:
    n: int
    rho: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 10:
            raise ValueError(f"n must be at least 10, got {self.n}")


@dataclass(frozen=True)
class McConfig:
    dgp: DgpConfig
    reps: int = 1000
    alpha: float = 0.05
    target: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError(f"reps must be at least 1, got {self.reps}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 <= self.target < len(BETA0):
            raise ValueError(f"target must index one of {len(BETA0)} coefficients")


@dataclass(frozen=True)
class McSummary:
    """Aggregate performance of one coefficient over replications.

    ``variance`` uses the 1/R normalization, so ``mse == bias**2 + variance``
    holds exactly and a single replication has zero variance.
    """

    bias: float
    variance: float
    mse: float
    coverage: float
    width: float
    pct_significant: float
    n_failed: int
    reps: int

    def as_dict(self) -> dict:
        return {
            "bias": self.bias,
            "variance": self.variance,
            "mse": self.mse,
            "coverage": self.coverage,
            "width": self.width,
            "pct_significant": self.pct_significant,
            "n_failed": self.n_failed,
            "reps": self.reps,
        }


def replication_rng(seed: int, rep_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep_index,)))


def draw_sample(cfg: DgpConfig, rep_index: int = 0) -> Sample:
    """Draw one sample of size ``cfg.n``.

    One (n, 5) block of uniforms supplies Z2, X3, V, E and the censoring
    draw, in that column order; the exponential comes from ``-log(1 - u)``.
    """
    u = replication_rng(cfg.seed, rep_index).random((cfg.n, 5))
    z2, x3, v, e = (2.0 * u[:, :4] - 1.0).T
    c = -np.log1p(-u[:, 4])
    if cfg.rho is not None:
        c = cfg.rho + c
    x2 = z2 + v
    t = 0.5 + x2 + x3 + v + e
    ones = np.ones(cfg.n)
    return Sample(
        y=np.minimum(t, c),
        delta=(t <= c).astype(np.int8),
        x=np.column_stack([ones, x2, x3]),
        z=np.column_stack([ones, z2, x3]),
    )


def write_csv(sample: Sample, path) -> None:
    """Write a simulated sample as CSV with columns ``y, delta, x2, x3, z2``.

    Floats are written with ``repr`` so reading them back is lossless.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["y", "delta", "x2", "x3", "z2"])
        for i in range(sample.n):
            out.writerow(
                [
                    repr(float(sample.y[i])),
                    int(sample.delta[i]),
                    repr(float(sample.x[i, 1])),
                    repr(float(sample.x[i, 2])),
                    repr(float(sample.z[i, 1])),
                ]
            )


def _one_replication(args):
    cfg, rep_index = args
    sample = draw_sample(cfg.dgp, rep_index)
    try:
        res = fit(sample, alpha=cfg.alpha)
    except (np.linalg.LinAlgError, DataError) as exc:
        logger.debug("replication %d failed: %s", rep_index, exc)
        return None
    k = cfg.target
    return res.beta[k], res.se[k], res.ci[k, 0], res.ci[k, 1]


def run_monte_carlo(cfg: McConfig, workers: int = 1) -> McSummary:
    """Run ``cfg.reps`` replications and summarize the target coefficient.

    Replications that raise a rank or data error are dropped and counted in
    ``n_failed``; more than 5% failures aborts with SimulationError.
    """
    jobs = [(cfg, r) for r in range(cfg.reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_replication, jobs, chunksize=16))
    else:
        results = [_one_replication(j) for j in jobs]

    ok = np.array([r for r in results if r is not None], dtype=np.float64).reshape(-1, 4)
    n_failed = cfg.reps - ok.shape[0]
    if n_failed > MAX_FAILED_FRACTION * cfg.reps:
        raise SimulationError(
            f"{n_failed} of {cfg.reps} replications failed (limit {MAX_FAILED_FRACTION:.0%})"
        )

    truth = BETA0[cfg.target]
    est, se, lo, hi = ok.T
    q = stats.norm.ppf(1.0 - cfg.alpha / 2.0)
    bias = float(np.mean(est) - truth)
    variance = float(np.var(est))
    return McSummary(
        bias=bias,
        variance=variance,
        mse=bias**2 + variance,
        coverage=float(np.mean((lo <= truth) & (truth <= hi))),
        width=float(np.mean(hi - lo)),
        pct_significant=float(np.mean(np.abs(est) > q * se)),
        n_failed=int(n_failed),
        reps=cfg.reps,
    )
