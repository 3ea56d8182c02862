"""Complete-data mediation estimates and their pooling over imputations."""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Sequence

import numpy as np

from . import _kernels as K
from .dataset import Dataset
from .errors import EmptyInput, NegativeOperand, SingularDesign, TooFewRows

# Canonical component order.
PARAMS = ("iM", "iY", "a", "b", "c_prime", "var_eM", "var_eY", "ab")
# Row order of printed reports.
REPORT_ORDER = ("a", "b", "c_prime", "ab", "iY", "iM", "var_eY", "var_eM")


@dataclass(frozen=True)
class ThetaVector:
    """The eight mediation quantities.

    For a single fit ``ab == a * b``.  A pooled vector (``pooled=True``)
    carries the mean of per-imputation products instead.
    """

    iM: float
    iY: float
    a: float
    b: float
    c_prime: float
    var_eM: float
    var_eY: float
    ab: float
    pooled: bool = False

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self)[:8], dtype=float)

    @classmethod
    def from_array(cls, arr, pooled: bool = False) -> "ThetaVector":
        return cls(*(float(v) for v in arr[:8]), pooled=pooled)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name in PARAMS}


@dataclass(frozen=True)
class SampleMoments:
    mean_x: float
    mean_m: float
    mean_y: float
    var_x: float
    var_m: float
    var_y: float
    cov_xm: float
    cov_my: float
    cov_xy: float

    def cov_matrix(self) -> np.ndarray:
        return np.array([
            [self.var_x, self.cov_xm, self.cov_xy],
            [self.cov_xm, self.var_m, self.cov_my],
            [self.cov_xy, self.cov_my, self.var_y],
        ])


def _xmy_matrix(ds: Dataset) -> np.ndarray:
    vals, msk = ds.model_arrays()
    if msk[:, :3].any():
        raise ValueError("fit_complete needs X, M and Y fully observed")
    return np.ascontiguousarray(vals[:, :3])


def sample_moments(ds: Dataset) -> SampleMoments:
    Z = _xmy_matrix(ds)
    if Z.shape[0] < 2:
        raise TooFewRows("need at least two rows for sample moments")
    mean = np.empty(3)
    cov = np.empty((3, 3))
    K.moments3(Z, mean, cov)
    return SampleMoments(*mean, cov[0, 0], cov[1, 1], cov[2, 2], cov[0, 1], cov[1, 2], cov[0, 2])


def raise_for_status(status: int) -> None:
    if status == K.SINGULAR:
        raise SingularDesign("X has no variance or X and M are collinear")
    if status == K.FEW_ROWS:
        raise TooFewRows("need at least 4 rows")


def fit_matrix(Z: np.ndarray) -> ThetaVector:
    """Fit from an n x 3 array with columns X, M, Y."""
    out = np.empty(8)
    raise_for_status(K.fit_matrix(np.ascontiguousarray(Z[:, :3], dtype=float), out))
    return ThetaVector.from_array(out)


def fit_complete(ds: Dataset) -> ThetaVector:
    """Closed-form fit of M ~ X and Y ~ M + X from sample moments.

    Residual variances use SSE / (n - 2) and SSE / (n - 3).
    """
    return fit_matrix(_xmy_matrix(ds))


def sobel_se(a: float, b: float, var_a: float, var_b: float, cov_ab: float = 0.0) -> float:
    """Delta-method standard error of a*b."""
    if var_a < 0 or var_b < 0:
        raise NegativeOperand("variances must be nonnegative")
    rad = b * b * var_a + 2.0 * a * b * cov_ab + a * a * var_b
    if rad < 0:
        raise NegativeOperand(f"negative radicand {rad!r}")
    return math.sqrt(rad)


def pool_rows(arr: np.ndarray) -> np.ndarray:
    """Column means of a K x 8 array; identical rows pool to themselves exactly."""
    first = arr[0]
    return first + (arr - first).sum(axis=0) / arr.shape[0]


def pool_point_estimates(fits: Sequence[ThetaVector]) -> ThetaVector:
    """Componentwise mean over imputations (ab is the mean of the products)."""
    if len(fits) == 0:
        raise EmptyInput("no fits to pool")
    arr = np.array([f.to_array() for f in fits])
    return ThetaVector.from_array(pool_rows(arr), pooled=True)
