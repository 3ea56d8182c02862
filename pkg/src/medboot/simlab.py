"""Simulation studies: data generation, missingness, and evaluation metrics."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bootstrap import analyze
from .dataset import AUX, M, X, Y, Dataset
from .errors import MedbootError, UndefinedDeviance
from .estimator import PARAMS
from .imputer import ImputationConfig
from .rng import SeedLike, as_seedseq, generator, subseed

MECHANISMS = ("MCAR", "MAR", "MNAR")


@dataclass(frozen=True)
class GenParams:
    a: float = 0.39
    b: float = 0.39
    c_prime: float = 0.0
    iM: float = 0.0
    iY: float = 0.0
    var_eX: float = 1.0
    var_eM: float = 1.0
    var_eY: float = 1.0
    aux_corr: float = 0.5
    n_aux: int = 2

    def __post_init__(self):
        if min(self.var_eX, self.var_eM, self.var_eY) <= 0:
            raise ValueError("variances must be positive")
        if not -1 < self.aux_corr < 1:
            raise ValueError("aux_corr must lie in (-1, 1)")
        if self.n_aux not in (0, 1, 2):
            raise ValueError("n_aux must be 0, 1 or 2")

    @property
    def var_m(self) -> float:
        return self.a ** 2 * self.var_eX + self.var_eM

    @property
    def var_y(self) -> float:
        return (self.b ** 2 * self.var_m + self.c_prime ** 2 * self.var_eX
                + 2 * self.a * self.b * self.c_prime * self.var_eX + self.var_eY)

    def truth(self) -> np.ndarray:
        """True values in canonical parameter order."""
        return np.array([self.iM, self.iY, self.a, self.b, self.c_prime,
                         self.var_eM, self.var_eY, self.a * self.b])


@dataclass(frozen=True)
class StudyConfig:
    gen: GenParams = field(default_factory=GenParams)
    N: int = 100
    mechanism: str = "MCAR"
    proportion: float = 0.1
    use_aux: bool = True
    R: int = 1000
    B: int = 1000
    K: int = 100
    level: float = 0.95
    seed: int = 0
    imputation: ImputationConfig = field(default_factory=ImputationConfig)

    def __post_init__(self):
        object.__setattr__(self, "mechanism", self.mechanism.upper())
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}")
        if not 0 <= self.proportion < 1:
            raise ValueError("proportion must lie in [0, 1)")
        if self.R < 1 or self.N < 1 or self.B < 2 or self.K < 1:
            raise ValueError("R, N, K >= 1 and B >= 2 required")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")


@dataclass
class StudyReport:
    """Per-parameter bias (x100), coverage and power / Type I error."""

    bias: np.ndarray
    coverage: np.ndarray
    power: np.ndarray
    truth: np.ndarray
    estimates: np.ndarray   # R_ok x 8 point estimates
    intervals: np.ndarray   # R_ok x 8 x 2
    n_failed: int = 0
    dropped_replicates: int = 0
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)

    def kind(self, j: int) -> str:
        return "type1" if self.truth[j] == 0 else "power"

    def row(self, name: str) -> dict:
        j = PARAMS.index(name)
        return {"bias": float(self.bias[j]), "coverage": float(self.coverage[j]),
                "power_or_type1": float(self.power[j]), "kind": self.kind(j)}


def generate_mediation_data(gp: GenParams, N: int, seed: SeedLike) -> Dataset:
    """Complete data from M = iM + aX + eM, Y = iY + bM + c'X + eY.

    Auxiliaries are standardized M (and Y) mixed with independent noise so
    their population correlation with M (and Y) equals ``aux_corr``.
    """
    rng = generator(seed)
    x = rng.normal(0.0, math.sqrt(gp.var_eX), N)
    m = gp.iM + gp.a * x + rng.normal(0.0, math.sqrt(gp.var_eM), N)
    y = gp.iY + gp.b * m + gp.c_prime * x + rng.normal(0.0, math.sqrt(gp.var_eY), N)
    eps = rng.standard_normal((N, 2))
    r, s = gp.aux_corr, math.sqrt(1 - gp.aux_corr ** 2)
    cols = {"x": x, "m": m, "y": y}
    roles = {"x": X, "m": M, "y": Y}
    if gp.n_aux >= 1:
        cols["a1"] = r * (m - gp.iM) / math.sqrt(gp.var_m) + s * eps[:, 0]
        roles["a1"] = AUX
    if gp.n_aux >= 2:
        ey = gp.iY + gp.b * gp.iM
        cols["a2"] = r * (y - ey) / math.sqrt(gp.var_y) + s * eps[:, 1]
        roles["a2"] = AUX
    names = tuple(cols)
    values = np.column_stack([cols[n] for n in names])
    return Dataset(names, values, np.zeros(values.shape, dtype=bool), roles)


def n_masked(q: float, N: int) -> int:
    # Guard against q * N landing a hair below an integer.
    return int(math.floor(q * N + 1e-9))


def impose_missingness(ds: Dataset, mechanism: str, q: float, seed: SeedLike) -> Dataset:
    """Mask exactly floor(qN) cells of M and of Y.

    MCAR: independent uniform row subsets.  MAR: M missing for the largest X,
    Y for the smallest X.  MNAR: M missing for the smallest first auxiliary,
    Y for the smallest second auxiliary.
    """
    mechanism = mechanism.upper()
    if mechanism not in MECHANISMS:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    if not 0 <= q < 1:
        raise ValueError("proportion must lie in [0, 1)")
    names = ds.model_names
    jm, jy = ds.column_index(names[1]), ds.column_index(names[2])
    if ds.mask[:, [jm, jy]].any():
        raise ValueError("M and Y must be complete before imposing missingness")
    N = ds.n_rows
    k = n_masked(q, N)
    mask = ds.mask.copy()
    if k == 0:
        return ds
    if mechanism == "MCAR":
        rng = generator(seed)
        rows_m = rng.choice(N, k, replace=False)
        rows_y = rng.choice(N, k, replace=False)
    elif mechanism == "MAR":
        jx = ds.column_index(names[0])
        if ds.mask[:, jx].any():
            raise ValueError("MAR needs X fully observed")
        order = np.argsort(ds.values[:, jx], kind="stable")
        rows_m = order[N - k:]
        rows_y = order[:k]
    else:
        aux = ds.aux_names
        if len(aux) < 2:
            raise ValueError("MNAR needs two auxiliary columns")
        rows_m = np.argsort(ds.column(aux[0]), kind="stable")[:k]
        rows_y = np.argsort(ds.column(aux[1]), kind="stable")[:k]
    mask[rows_m, jm] = True
    mask[rows_y, jy] = True
    return ds.with_mask(mask)


def evaluate_bias(estimates, truth: float) -> float:
    """Relative bias x100, or absolute bias x100 when the truth is zero."""
    mean = float(np.mean(estimates))
    if truth != 0:
        return 100.0 * (mean / truth - 1.0)
    return 100.0 * (mean - truth)


def evaluate_coverage(intervals, truth: float) -> float:
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    return float(np.mean((iv[:, 0] < truth) & (truth < iv[:, 1])))


def evaluate_power(intervals) -> float:
    """Share of intervals that exclude zero."""
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    return float(np.mean((iv[:, 0] > 0) | (iv[:, 1] < 0)))


def replication_dataset(cfg: StudyConfig, r: int) -> Dataset:
    """Data of replication r before auxiliaries are dropped."""
    seed = as_seedseq(cfg.seed)
    ds = generate_mediation_data(cfg.gen, cfg.N, subseed(seed, r, 0))
    return impose_missingness(ds, cfg.mechanism, cfg.proportion, subseed(seed, r, 1))


def _run_replication(cfg: StudyConfig, r: int):
    ds = replication_dataset(cfg, r)
    if not cfg.use_aux:
        ds = ds.without_aux()
    try:
        rep = analyze(ds, cfg.B, cfg.K, cfg.level, subseed(as_seedseq(cfg.seed), r, 2), cfg=cfg.imputation)
    except MedbootError:
        return None
    return rep.point.to_array(), rep.intervals, rep.dropped


def _run_block(args):
    cfg, rs = args
    return [_run_replication(cfg, r) for r in rs]


def run_study(cfg: StudyConfig, workers: int = 1, progress=None) -> StudyReport:
    """Monte Carlo study over cfg.R replications."""
    t0 = time.perf_counter()
    rs = list(range(cfg.R))
    if workers <= 1:
        results = []
        for r in rs:
            results.append(_run_replication(cfg, r))
            if progress:
                progress(r + 1, cfg.R)
    else:
        n_chunks = min(cfg.R, workers * 4)
        chunks = [rs[i::n_chunks] for i in range(n_chunks)]
        results = [None] * cfg.R
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for chunk, out in zip(chunks, ex.map(_run_block, [(cfg, c) for c in chunks])):
                for r, res in zip(chunk, out):
                    results[r] = res
    ok = [res for res in results if res is not None]
    truth = cfg.gen.truth()
    if ok:
        est = np.array([o[0] for o in ok])
        iv = np.array([o[1] for o in ok])
        bias = np.array([evaluate_bias(est[:, j], truth[j]) for j in range(8)])
        cov = np.array([evaluate_coverage(iv[:, j], truth[j]) for j in range(8)])
        pw = np.array([evaluate_power(iv[:, j]) for j in range(8)])
    else:
        est, iv = np.empty((0, 8)), np.empty((0, 8, 2))
        bias = cov = pw = np.full(8, np.nan)
    return StudyReport(
        bias=bias, coverage=cov, power=pw, truth=truth, estimates=est, intervals=iv,
        n_failed=len(results) - len(ok),
        dropped_replicates=int(sum(o[2] for o in ok)),
        wall_time=time.perf_counter() - t0,
        config=config_dict(cfg),
    )


def config_dict(cfg: StudyConfig) -> dict:
    d = asdict(cfg)
    d["gen"] = asdict(cfg.gen)
    d["imputation"] = asdict(cfg.imputation)
    return d


@dataclass(frozen=True)
class SensitivityRow:
    K: int
    estimate: float
    se: float
    dev_estimate: float
    dev_se: float


def imputation_sensitivity(cfg: StudyConfig, k_grid, k_ref: int, replication: int = 0,
                           workers: int = 1) -> list:
    """Relative deviance of the ab estimate and its bootstrap SE from the
    values at ``k_ref`` imputations, on one fixed simulated dataset.

    The seed is shared across K, so only the number of imputations varies.
    """
    k_grid = [int(k) for k in k_grid]
    if k_ref < 1 or any(k < 1 for k in k_grid):
        raise ValueError("imputation counts must be >= 1")
    if k_ref < max(k_grid):
        raise ValueError("k_ref must be at least max(k_grid)")
    ds = replication_dataset(cfg, replication)
    if not cfg.use_aux:
        ds = ds.without_aux()
    seed = subseed(as_seedseq(cfg.seed), replication, 2)
    j = PARAMS.index("ab")

    def ab_stats(k):
        rep = analyze(ds, cfg.B, k, cfg.level, seed, cfg=cfg.imputation, workers=workers)
        return rep.point.ab, float(rep.se[j])

    ref_est, ref_se = ab_stats(k_ref)
    if ref_est == 0 or ref_se == 0:
        raise UndefinedDeviance("reference value is zero")
    rows = []
    for k in k_grid:
        est, se = (ref_est, ref_se) if k == k_ref else ab_stats(k)
        rows.append(SensitivityRow(k, est, se, (est - ref_est) / ref_est, (se - ref_se) / ref_se))
    return rows
