"""Multiple imputation nested inside the nonparametric bootstrap.

Replicate ``b`` (1..B) draws its resample and runs its imputation chain on
substream ``(b, attempt)`` of the master seed; the original-data chain uses
substream ``0``.  Results are therefore identical for any worker count.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri

from .dataset import Dataset
from .errors import (
    REPLICATE_FAILURES,
    AllReplicatesFailed,
    InvalidLevel,
    TooFewReplicates,
)
from .estimator import PARAMS, ThetaVector, pool_rows
from .imputer import ImputationConfig, check_imputable, run_chain
from .rng import SeedLike, as_seedseq, generator, subseed

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 100
RESAMPLE_STREAM = 2


@dataclass(frozen=True)
class BootstrapReport:
    replicate_estimates: np.ndarray  # b_effective x 8, canonical parameter order
    point: ThetaVector
    se: np.ndarray
    intervals: np.ndarray  # 8 x 2
    level: float
    b_requested: int
    n_imputations: int
    retries: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def b_effective(self) -> int:
        return self.replicate_estimates.shape[0]

    @property
    def dropped(self) -> int:
        return self.b_requested - self.b_effective

    def param(self, name: str) -> dict:
        j = PARAMS.index(name)
        return {
            "estimate": getattr(self.point, name),
            "se": float(self.se[j]),
            "ci_lo": float(self.intervals[j, 0]),
            "ci_hi": float(self.intervals[j, 1]),
        }


def resample_indices(n: int, seed: SeedLike) -> np.ndarray:
    return generator(seed, RESAMPLE_STREAM).integers(0, n, size=n)


def bootstrap_resample(ds: Dataset, seed: SeedLike) -> Dataset:
    """n rows drawn uniformly with replacement, masks carried along."""
    return ds.take_rows(resample_indices(ds.n_rows, seed))


def bootstrap_se(estimates) -> float:
    """Sample standard deviation with denominator B - 1."""
    x = np.asarray(estimates, dtype=float)
    if x.size < 2:
        raise TooFewReplicates(f"need at least 2 replicates, got {x.size}")
    return float(np.sqrt(np.sum((x - x.mean()) ** 2) / (x.size - 1)))


def bc_interval(estimates, point: float, level: float) -> tuple:
    """Bias-corrected percentile interval.

    The share of replicates strictly below ``point`` is clamped to
    [1/(2B), 1 - 1/(2B)] before the probit.  Endpoints are the order
    statistics ``int(adjusted_level * (B + 1))`` (1-based), clamped to [1, B].
    """
    x = np.sort(np.asarray(estimates, dtype=float), kind="stable")
    B = x.size
    if B < 2:
        raise TooFewReplicates(f"need at least 2 replicates, got {B}")
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"level must lie in (0, 1), got {level!r}")
    alpha = (1.0 - level) / 2.0
    p = np.count_nonzero(x < point) / B
    p = min(max(p, 1.0 / (2 * B)), 1.0 - 1.0 / (2 * B))
    z0 = float(ndtri(p))
    a_lo = float(ndtr(2 * z0 + ndtri(alpha)))
    a_hi = float(ndtr(2 * z0 + ndtri(1.0 - alpha)))
    lo = min(max(int(a_lo * (B + 1)), 1), B)
    hi = min(max(int(a_hi * (B + 1)), 1), B)
    return float(x[lo - 1]), float(x[hi - 1])


def _replicate(vals, msk, cfg, seed, b):
    """Pooled estimate for replicate b, retrying failed resamples."""
    n = vals.shape[0]
    for attempt in range(MAX_ATTEMPTS):
        ss = subseed(seed, b, attempt)
        idx = resample_indices(n, ss)
        try:
            check_imputable(vals[idx], msk[idx])
            _, fits = run_chain(vals[idx], msk[idx], cfg, ss)
        except REPLICATE_FAILURES:
            continue
        return pool_rows(fits), attempt
    return None, MAX_ATTEMPTS


def _replicate_block(args):
    vals, msk, cfg, seed, bs = args
    return [_replicate(vals, msk, cfg, seed, b) for b in bs]


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def run_replicates(vals, msk, cfg, seed, B, workers=1):
    """Pooled estimates for replicates 1..B, ordered by replicate index."""
    bs = list(range(1, B + 1))
    if workers <= 1 or B < 2:
        return _replicate_block((vals, msk, cfg, seed, bs))
    n_chunks = min(B, workers * 4)
    chunks = [bs[i::n_chunks] for i in range(n_chunks)]
    results = [None] * B
    with ProcessPoolExecutor(max_workers=workers) as ex:
        for chunk, out in zip(chunks, ex.map(_replicate_block, [(vals, msk, cfg, seed, c) for c in chunks])):
            for b, r in zip(chunk, out):
                results[b - 1] = r
    return results


def summarize(point: np.ndarray, reps: np.ndarray, level: float) -> tuple:
    se = np.array([bootstrap_se(reps[:, j]) for j in range(8)])
    ci = np.array([bc_interval(reps[:, j], point[j], level) for j in range(8)])
    return se, ci


def analyze(ds: Dataset, B: int, K: int, level: float = 0.95, seed: SeedLike = 0,
            cfg: ImputationConfig = None, workers: int = 1) -> BootstrapReport:
    """Point estimates, bootstrap SEs and BC intervals for the mediation model."""
    if B < 2:
        raise TooFewReplicates(f"B must be at least 2, got {B}")
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"level must lie in (0, 1), got {level!r}")
    cfg = replace(cfg or ImputationConfig(), n_imputations=K)
    seed = as_seedseq(seed)
    vals, msk = ds.model_arrays()
    check_imputable(vals, msk)
    _, fits = run_chain(vals, msk, cfg, subseed(seed, 0))
    point = pool_rows(fits)

    results = run_replicates(vals, msk, cfg, seed, B, workers)
    ok = [r for r, _ in results if r is not None]
    retries = sum(a for r, a in results if r is not None)
    if not ok:
        raise AllReplicatesFailed(f"all {B} bootstrap replicates failed")
    reps = np.array(ok)
    if len(ok) < B:
        log.warning("%d of %d bootstrap replicates dropped", B - len(ok), B)
    if reps.shape[0] < 2:
        raise TooFewReplicates("fewer than 2 bootstrap replicates succeeded")
    se, ci = summarize(point, reps, level)
    return BootstrapReport(
        replicate_estimates=reps,
        point=ThetaVector.from_array(point, pooled=True),
        se=se,
        intervals=ci,
        level=level,
        b_requested=B,
        n_imputations=K,
        retries=retries,
    )


def percentile_interval(estimates, level: float) -> tuple:
    """Plain percentile interval using the same order-statistic rule."""
    x = np.sort(np.asarray(estimates, dtype=float))
    B = x.size
    alpha = (1.0 - level) / 2.0
    a_lo = float(ndtr(ndtri(alpha)))
    a_hi = float(ndtr(ndtri(1.0 - alpha)))
    lo = min(max(int(a_lo * (B + 1)), 1), B)
    hi = min(max(int(a_hi * (B + 1)), 1), B)
    return float(x[lo - 1]), float(x[hi - 1])

