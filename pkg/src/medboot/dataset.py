"""Rectangular numeric data with a missingness mask and variable roles."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import DataError

X, M, Y, AUX, IGNORED = "X", "M", "Y", "AUX", "IGNORED"
ROLES = (X, M, Y, AUX, IGNORED)

MissingCode = Union[float, str, None]


@dataclass(frozen=True)
class Dataset:
    """Immutable table of named numeric columns.

    ``mask[i, j]`` is True when cell ``(i, j)`` is missing; the value stored
    in a masked cell is meaningless and never read.  ``roles`` maps every
    column name to one of X, M, Y, AUX or IGNORED.
    """

    names: tuple
    values: np.ndarray
    mask: np.ndarray
    roles: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        names = tuple(self.names)
        if values.ndim != 2 or values.shape != mask.shape:
            raise DataError("values and mask must be 2-D arrays of equal shape")
        if values.shape[1] != len(names):
            raise DataError("one name per column required")
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")
        if not np.all(np.isfinite(values[~mask])):
            raise DataError("observed cells must be finite")
        roles = {n: IGNORED for n in names}
        for name, role in dict(self.roles).items():
            if name not in roles:
                raise DataError(f"role assigned to unknown column {name!r}")
            if role not in ROLES:
                raise DataError(f"unknown role {role!r}")
            roles[name] = role
        for r in (X, M, Y):
            n_r = sum(1 for v in roles.values() if v == r)
            if n_r != 1:
                raise DataError(f"exactly one column must have role {r}, got {n_r}")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "roles", roles)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def aux_names(self) -> list:
        return [n for n in self.names if self.roles[n] == AUX]

    @property
    def model_names(self) -> list:
        """Role-bound columns in role order: X, M, Y, then auxiliaries."""
        by_role = {self.roles[n]: n for n in self.names if self.roles[n] in (X, M, Y)}
        return [by_role[X], by_role[M], by_role[Y]] + self.aux_names

    def column_index(self, name: str) -> int:
        return self.names.index(name)

    def model_arrays(self) -> tuple:
        """(values, mask) restricted to role-bound columns in role order.

        Masked entries of the returned value array are set to NaN.
        """
        idx = [self.column_index(n) for n in self.model_names]
        vals = self.values[:, idx].copy()
        msk = self.mask[:, idx].copy()
        vals[msk] = np.nan
        return vals, msk

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def replace_model_values(self, filled: np.ndarray) -> "Dataset":
        """Complete copy with role-bound columns overwritten by ``filled``."""
        vals = self.values.copy()
        msk = self.mask.copy()
        for j, name in enumerate(self.model_names):
            k = self.column_index(name)
            vals[:, k] = filled[:, j]
            msk[:, k] = False
        return Dataset(self.names, vals, msk, self.roles)

    def take_rows(self, rows) -> "Dataset":
        return Dataset(self.names, self.values[rows], self.mask[rows], self.roles)

    def with_mask(self, mask: np.ndarray) -> "Dataset":
        return Dataset(self.names, self.values, mask, self.roles)

    def without_aux(self) -> "Dataset":
        roles = {n: (IGNORED if r == AUX else r) for n, r in self.roles.items()}
        return Dataset(self.names, self.values, self.mask, roles)

    def equals(self, other: "Dataset") -> bool:
        """Equality on names, roles, mask and observed values."""
        return (
            self.names == other.names
            and dict(self.roles) == dict(other.roles)
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.values[~self.mask], other.values[~other.mask])
        )


def from_columns(columns: Mapping[str, Sequence[float]], roles: Mapping[str, str], mask=None) -> Dataset:
    """Build a dataset from a name -> column mapping; NaN cells count as missing."""
    names = list(columns)
    values = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    if mask is None:
        mask = np.isnan(values)
    values = np.where(mask, np.nan, values)
    return Dataset(tuple(names), values, mask, roles)


def _is_missing(cell: str, missing_code: MissingCode) -> bool:
    if cell == "":
        return True
    if missing_code is None or missing_code == "blank":
        return False
    try:
        return float(cell) == float(missing_code)
    except ValueError:
        return False


def load_dataset(path, roles: Mapping[str, str], missing_code: MissingCode = "blank") -> Dataset:
    """Read a headered comma-delimited file.

    Empty fields are always missing; when ``missing_code`` is a number, cells
    equal to it are missing too.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    for name in roles:
        if name not in header:
            raise DataError(f"column {name!r} not found in header of {path}")
    body = [r for r in rows[1:] if r]
    n, c = len(body), len(header)
    values = np.full((n, c), np.nan)
    mask = np.zeros((n, c), dtype=bool)
    for i, row in enumerate(body):
        if len(row) != c:
            raise DataError(f"line {i + 2}: expected {c} fields, got {len(row)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if _is_missing(cell, missing_code):
                mask[i, j] = True
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"line {i + 2}, column {header[j]!r}: cannot parse {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"line {i + 2}, column {header[j]!r}: non-finite value")
            values[i, j] = v
    return Dataset(tuple(header), values, mask, roles)


def save_dataset(ds: Dataset, path, missing_code: MissingCode = "blank") -> None:
    """Write ``ds`` in the format read by :func:`load_dataset` (values exact via repr)."""
    blank = missing_code is None or missing_code == "blank"
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ds.names)
        for i in range(ds.n_rows):
            w.writerow(
                ("" if blank else repr(float(missing_code))) if ds.mask[i, j] else repr(float(ds.values[i, j]))
                for j in range(len(ds.names))
            )


@dataclass(frozen=True)
class MissingPattern:
    names: tuple
    missing: tuple  # True where the variable is missing
    count: int

    def label(self) -> str:
        return "".join("X" if m else "O" for m in self.missing)


def missing_patterns(ds: Dataset) -> list:
    """Distinct observed/missing configurations over role-bound columns.

    Patterns are listed in order of first appearance.
    """
    names = tuple(ds.model_names)
    _, msk = ds.model_arrays()
    counts: dict = {}
    for row in map(tuple, msk.tolist()):
        counts[row] = counts.get(row, 0) + 1
    return [MissingPattern(names, tuple(bool(v) for v in k), c) for k, c in counts.items()]
