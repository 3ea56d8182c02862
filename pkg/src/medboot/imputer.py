"""Multivariate-normal multiple imputation.

EM supplies the starting point; a single data-augmentation chain then
alternates conditional draws of the missing cells with posterior draws of
(mu, sigma) and emits one completed dataset every ``thin`` iterations after
``burn_in``.  Auxiliary columns take part in the joint model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .dataset import Dataset
from .errors import AllMissingColumn, AllMissingRow, ChainDivergence, NonPositiveDefinite, SingularDesign, TooFewRows
from .rng import SeedLike, generator


@dataclass(frozen=True)
class MvnParams:
    mu: np.ndarray
    sigma: np.ndarray
    n_iter: int = 0
    converged: bool = True


@dataclass(frozen=True)
class ImputationConfig:
    n_imputations: int = 5
    em_max_iter: int = 500
    em_tol: float = 1e-8
    burn_in: int = 200
    thin: int = 100
    ridge_rel: float = 1e-8

    def __post_init__(self):
        if self.n_imputations < 1:
            raise ValueError("n_imputations must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.em_max_iter < 1 or not self.em_tol > 0:
            raise ValueError("em_max_iter >= 1 and em_tol > 0 required")
        if self.ridge_rel < 0:
            raise ValueError("ridge_rel must be >= 0")


@dataclass(frozen=True)
class Patterns:
    """Rows grouped by missingness pattern, laid out for the kernels."""

    rows: np.ndarray   # row indices ordered by group
    ptr: np.ndarray    # group g spans rows[ptr[g]:ptr[g+1]]
    pobs: np.ndarray   # observed column indices per group (padded)
    pnobs: np.ndarray
    pmis: np.ndarray   # missing column indices per group (padded)
    pnmis: np.ndarray
    cell_rows: np.ndarray  # missing cells in kernel emission order
    cell_cols: np.ndarray

    @property
    def n_missing(self) -> int:
        return len(self.cell_rows)


def group_patterns(mask: np.ndarray) -> Patterns:
    n, d = mask.shape
    uniq, inverse = np.unique(mask, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    counts = np.bincount(inverse, minlength=len(uniq))
    ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    g = len(uniq)
    pobs = np.zeros((g, d), dtype=np.int64)
    pmis = np.zeros((g, d), dtype=np.int64)
    pnobs = np.zeros(g, dtype=np.int64)
    pnmis = np.zeros(g, dtype=np.int64)
    cell_rows, cell_cols = [], []
    for k, pat in enumerate(uniq):
        o = np.flatnonzero(~pat)
        m = np.flatnonzero(pat)
        pobs[k, : len(o)] = o
        pmis[k, : len(m)] = m
        pnobs[k], pnmis[k] = len(o), len(m)
        for r in order[ptr[k]: ptr[k + 1]]:
            cell_rows.extend([r] * len(m))
            cell_cols.extend(m)
    return Patterns(
        order.astype(np.int64), ptr, pobs, pnobs, pmis, pnmis,
        np.array(cell_rows, dtype=np.int64), np.array(cell_cols, dtype=np.int64),
    )


def check_imputable(vals: np.ndarray, msk: np.ndarray) -> None:
    n_obs = (~msk).sum(axis=0)
    if (n_obs < 2).any():
        raise AllMissingColumn(f"columns {np.flatnonzero(n_obs < 2).tolist()} observed in fewer than 2 rows")
    if msk.all(axis=1).any():
        raise AllMissingRow(f"{int(msk.all(axis=1).sum())} rows have every model variable missing")


def _start_values(vals, msk):
    d = vals.shape[1]
    mu = np.empty(d)
    sig = np.zeros((d, d))
    for j in range(d):
        col = vals[~msk[:, j], j]
        mu[j] = col.mean()
        sig[j, j] = col.var()
    return mu, sig


def _em_arrays(vals, msk, pats, max_iter, tol, ridge_rel, trace_len=0):
    check_imputable(vals, msk)
    Z = np.where(msk, 0.0, vals)
    mu, sig = _start_values(vals, msk)
    if (np.diag(sig) <= 0).any():
        raise NonPositiveDefinite("a column has zero observed variance")
    trace = np.full(trace_len, np.nan)
    status, n_iter = K.em_mvn(
        Z, pats.rows, pats.ptr, pats.pobs, pats.pnobs, pats.pmis, pats.pnmis,
        mu, sig, max_iter, tol, ridge_rel, trace,
    )
    if status != K.OK:
        raise NonPositiveDefinite("covariance block could not be factored during EM")
    return MvnParams(mu, sig, n_iter, n_iter < max_iter), trace


def em_mvn(ds: Dataset, max_iter: int = 500, tol: float = 1e-8, ridge_rel: float = 1e-8) -> MvnParams:
    """Maximum-likelihood (mu, sigma) of role-bound columns under missingness.

    sigma uses the denominator-n convention.
    """
    vals, msk = ds.model_arrays()
    params, _ = _em_arrays(vals, msk, group_patterns(msk), max_iter, tol, ridge_rel)
    return params


def em_trace(ds: Dataset, max_iter: int = 500, tol: float = 1e-8) -> tuple:
    """EM estimate plus the observed-data log-likelihood at each iteration."""
    vals, msk = ds.model_arrays()
    params, trace = _em_arrays(vals, msk, group_patterns(msk), max_iter, tol, 1e-8, trace_len=max_iter + 1)
    return params, trace[~np.isnan(trace)]


def observed_loglik(ds: Dataset, params: MvnParams) -> float:
    vals, msk = ds.model_arrays()
    pats = group_patterns(msk)
    Z = np.where(msk, 0.0, vals)
    return float(K.observed_loglik(Z, pats.rows, pats.ptr, pats.pobs, pats.pnobs,
                                   np.asarray(params.mu, float), np.asarray(params.sigma, float)))


def conditional_mean(ds: Dataset, params: MvnParams, row: int) -> np.ndarray:
    """E[missing cells of ``row`` | its observed cells] under ``params``."""
    vals, msk = ds.model_arrays()
    o, m = ~msk[row], msk[row]
    mu, sig = params.mu, params.sigma
    beta = np.linalg.solve(sig[np.ix_(o, o)], sig[np.ix_(o, m)])
    return mu[m] + (vals[row, o] - mu[o]) @ beta


def run_chain(vals: np.ndarray, msk: np.ndarray, cfg: ImputationConfig, seed: SeedLike,
              pats: Patterns = None, fit: bool = True):
    """Imputed missing-cell values (K x n_missing) and fits (K x 8) for one dataset.

    ``vals``/``msk`` are the role-bound arrays (X, M, Y, AUX...).  Normals and
    chi-square variates come from two separate substreams of ``seed``, so the
    first k imputations do not depend on the requested K.
    """
    n, d = vals.shape
    if pats is None:
        pats = group_patterns(msk)
    kk = cfg.n_imputations
    if pats.n_missing == 0:
        if not fit:
            return np.empty((kk, 0)), np.full((kk, 8), np.nan)
        out = np.empty(8)
        st = K.fit_matrix(np.ascontiguousarray(vals[:, :3]), out)
        if st == K.SINGULAR:
            raise SingularDesign("singular design in complete data")
        if st == K.FEW_ROWS:
            raise TooFewRows("need at least 4 rows")
        return np.empty((kk, 0)), np.tile(out, (kk, 1))
    if n <= d:
        raise TooFewRows(f"need more than {d} rows to impute {d} variables")
    params, _ = _em_arrays(vals, msk, pats, cfg.em_max_iter, cfg.em_tol, cfg.ridge_rel)
    n_iter = cfg.burn_in + kk * cfg.thin
    n_norm = pats.n_missing + d * (d - 1) // 2 + d
    normals = generator(seed, 0).standard_normal((n_iter, n_norm))
    chis = generator(seed, 1).chisquare(n - 1 - np.arange(d), size=(n_iter, d))
    shift = np.array([vals[~msk[:, j], j].mean() for j in range(d)])
    Z = np.where(msk, 0.0, vals - shift)
    out_imp = np.empty((kk, pats.n_missing))
    out_fit = np.full((kk, 8), np.nan)
    status, _ = K.da_chain(
        Z, shift, pats.rows, pats.ptr, pats.pobs, pats.pnobs, pats.pmis, pats.pnmis,
        params.mu - shift, params.sigma, cfg.burn_in, cfg.thin, kk, normals, chis,
        cfg.ridge_rel, fit, out_imp, out_fit,
    )
    if status == K.SINGULAR:
        raise SingularDesign("singular design in an imputed dataset")
    if status == K.FEW_ROWS:
        raise TooFewRows("need at least 4 rows")
    if status != K.OK:
        raise ChainDivergence("covariance draw could not be repaired to positive definite")
    return out_imp, out_fit


def impute(ds: Dataset, cfg: ImputationConfig, seed: SeedLike) -> list:
    """K completed copies of ``ds``; observed cells are left untouched."""
    vals, msk = ds.model_arrays()
    check_imputable(vals, msk)
    pats = group_patterns(msk)
    if pats.n_missing == 0:
        return [ds for _ in range(cfg.n_imputations)]
    imp, _ = run_chain(vals, msk, cfg, seed, pats, fit=False)
    out = []
    for k in range(cfg.n_imputations):
        filled = vals.copy()
        filled[pats.cell_rows, pats.cell_cols] = imp[k]
        out.append(ds.replace_model_values(filled))
    return out
