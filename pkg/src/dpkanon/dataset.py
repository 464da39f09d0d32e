"""Tabular microdata loading, standardization, and the empirical joint
distribution of the quasi-identifiers with its conditional CDFs.

Values are grouped by exact equality after rounding to 12 significant
digits, so ordinal/binary codes group exactly and continuous inputs are
robust to floating-point noise.
"""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    EmptyConditionError,
    EmptyInputError,
    ParseError,
    SchemaError,
)

SIG_DIGITS = 12

KINDS = ("ordinal", "binary", "continuous")


def round_sig(x, digits: int = SIG_DIGITS):
    """Round to `digits` significant digits (elementwise, 0 stays 0)."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    nz = (x != 0) & np.isfinite(x)
    mag = np.floor(np.log10(np.abs(x[nz])))
    f = 10.0 ** (digits - 1 - mag)
    out[nz] = np.round(x[nz] * f) / f
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = "ordinal"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")


@dataclass(frozen=True)
class TableSchema:
    """Column-role declaration for load_table."""

    qi: tuple
    response: str
    id_col: str | None = None
    kinds: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DataTable:
    """Quasi-identifier matrix, response vector, and column metadata."""

    qi: np.ndarray          # (n, d) float
    response: np.ndarray    # (n,) float
    columns: tuple          # d Column entries
    record_ids: tuple       # n unique identifiers

    def __post_init__(self):
        qi = np.asarray(self.qi, dtype=float)
        y = np.asarray(self.response, dtype=float)
        object.__setattr__(self, "qi", qi)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "record_ids", tuple(self.record_ids))
        if qi.ndim != 2 or qi.shape[0] < 1 or qi.shape[1] < 1:
            raise EmptyInputError("qi matrix must be non-empty and 2-d")
        if qi.shape[0] != y.shape[0] or qi.shape[0] != len(self.record_ids):
            raise SchemaError("row count mismatch between qi, response, record_ids")
        if qi.shape[1] != len(self.columns):
            raise SchemaError("column metadata does not match qi width")
        if len(set(self.record_ids)) != len(self.record_ids):
            raise SchemaError("record_ids must be unique")

    @property
    def n(self) -> int:
        return self.qi.shape[0]

    @property
    def d(self) -> int:
        return self.qi.shape[1]


@dataclass(frozen=True)
class Standardizer:
    """Per-column location/scale with flags for constant columns."""

    means: np.ndarray
    scales: np.ndarray
    constant_flags: np.ndarray
    response_mean: float
    response_scale: float
    response_constant: bool

    def apply_qi(self, qi: np.ndarray) -> np.ndarray:
        return (np.asarray(qi, dtype=float) - self.means) / self.scales

    def revert_qi(self, qi_std: np.ndarray) -> np.ndarray:
        return np.asarray(qi_std, dtype=float) * self.scales + self.means

    def apply_response(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.response_mean) / self.response_scale

    def revert_response(self, y_std: np.ndarray) -> np.ndarray:
        return np.asarray(y_std, dtype=float) * self.response_scale + self.response_mean


def load_table(path, schema: TableSchema) -> DataTable:
    """Load a CSV file per the declared schema.

    First row is the header; rows are kept in file order. record_ids are row
    ordinals unless schema.id_col is declared.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: file is empty")
        header = [h.strip() for h in header]
        declared = list(schema.qi) + [schema.response]
        if schema.id_col is not None:
            declared.append(schema.id_col)
        for name in declared:
            if name not in header:
                raise SchemaError(f"{path}: declared column {name!r} not in header")
        col_idx = {name: header.index(name) for name in declared}

        qi_rows, y_vals, ids = [], [], []
        for rownum, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            vals = []
            for name in schema.qi:
                cell = row[col_idx[name]].strip()
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {rownum}, column {name!r}: "
                        f"cannot parse {cell!r} as a number"
                    )
            cell = row[col_idx[schema.response]].strip()
            try:
                y_vals.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"{path}: row {rownum}, column {schema.response!r}: "
                    f"cannot parse {cell!r} as a number"
                )
            qi_rows.append(vals)
            if schema.id_col is not None:
                ids.append(row[col_idx[schema.id_col]].strip())
            else:
                ids.append(rownum - 2)

    if not qi_rows:
        raise EmptyInputError(f"{path}: no data rows")

    columns = tuple(
        Column(name, schema.kinds.get(name, "ordinal")) for name in schema.qi
    )
    return DataTable(np.array(qi_rows), np.array(y_vals), columns, tuple(ids))


def standardize(table: DataTable) -> tuple[DataTable, Standardizer]:
    """Center and scale every column to mean 0, variance 1 (denominator n-1).

    Constant columns (and a constant response) are flagged and passed through
    with scale 1 so downstream distances stay well defined.
    """
    n = table.n
    means = table.qi.mean(axis=0)
    if n > 1:
        scales = table.qi.std(axis=0, ddof=1)
    else:
        scales = np.zeros(table.d)
    const = scales == 0.0
    scales = np.where(const, 1.0, scales)
    means = np.where(const, 0.0, means)

    y_mean = float(table.response.mean())
    y_scale = float(table.response.std(ddof=1)) if n > 1 else 0.0
    y_const = y_scale == 0.0
    if y_const:
        y_mean, y_scale = 0.0, 1.0

    std = Standardizer(means, scales, const, y_mean, y_scale, y_const)
    out = DataTable(
        std.apply_qi(table.qi),
        std.apply_response(table.response),
        table.columns,
        table.record_ids,
    )
    return out, std


class EmpiricalJoint:
    """Distinct per-dimension values plus sparse joint counts.

    Index tuples are 0-based. A prefix tree over index tuples backs the
    conditional CDF queries.
    """

    def __init__(self, values, counts, total):
        self.values = [np.asarray(v, dtype=float) for v in values]
        self.counts = dict(counts)
        self.total = int(total)
        self.d = len(self.values)
        self._validate()
        self._build_trie()

    def _validate(self):
        if sum(self.counts.values()) != self.total:
            raise ValueError("counts do not sum to total")
        for t, c in self.counts.items():
            if c < 1:
                raise ValueError(f"count for {t} must be positive")
            if len(t) != self.d:
                raise ValueError(f"index tuple {t} has wrong length")
            for j, i in enumerate(t):
                if not 0 <= i < len(self.values[j]):
                    raise ValueError(f"index tuple {t} out of range in dim {j}")
        for v in self.values:
            if np.any(np.diff(v) <= 0):
                raise ValueError("values must be strictly increasing")

    def _build_trie(self):
        children: dict[tuple, Counter] = {}
        for t, c in self.counts.items():
            for j in range(self.d):
                children.setdefault(t[:j], Counter())[t[j]] += c
        # per prefix: sorted next indices, cumulative fractions, prefix count
        self._cond = {}
        for prefix, ctr in children.items():
            idx = np.array(sorted(ctr), dtype=int)
            cnt = np.array([ctr[i] for i in idx], dtype=float)
            tot = cnt.sum()
            self._cond[prefix] = (idx, np.cumsum(cnt) / tot, tot)

    # -- lookups ---------------------------------------------------------

    def value_index(self, j: int, x: float) -> int:
        """Index of observed value x in dimension j, or -1 if unobserved."""
        v = self.values[j]
        x = round_sig(x)
        i = int(np.searchsorted(v, x))
        if i < len(v) and v[i] == x:
            return i
        return -1

    def _prefix_indices(self, j: int, prefix) -> tuple:
        if len(prefix) != j:
            raise DomainError(f"prefix of length {len(prefix)} for dimension {j}")
        idx = []
        for jj, x in enumerate(prefix):
            i = self.value_index(jj, x)
            if i < 0:
                raise EmptyConditionError(
                    f"prefix value {x} unobserved in dimension {jj}"
                )
            idx.append(i)
        key = tuple(idx)
        if key not in self._cond:
            raise EmptyConditionError(f"prefix {tuple(prefix)} has zero joint count")
        return key

    def cond_table(self, prefix_idx: tuple):
        """(next indices, cumulative fractions, prefix count) for an index prefix."""
        if prefix_idx not in self._cond:
            raise EmptyConditionError(f"index prefix {prefix_idx} has zero count")
        return self._cond[prefix_idx]

    def pmf(self) -> dict:
        """Joint PMF as {value tuple: probability}."""
        out = {}
        for t, c in self.counts.items():
            key = tuple(self.values[j][i] for j, i in enumerate(t))
            out[key] = c / self.total
        return out


def build_empirical_joint(qi: np.ndarray) -> EmpiricalJoint:
    """Tally sorted distinct values per dimension and sparse joint counts."""
    qi = np.asarray(qi, dtype=float)
    if qi.ndim == 1:
        qi = qi[:, None]
    if qi.size == 0:
        raise EmptyInputError("empty quasi-identifier matrix")
    qi = round_sig(qi)
    values = [np.unique(qi[:, j]) for j in range(qi.shape[1])]
    idx = np.column_stack(
        [np.searchsorted(values[j], qi[:, j]) for j in range(qi.shape[1])]
    )
    counts = Counter(map(tuple, idx.tolist()))
    return EmpiricalJoint(values, counts, qi.shape[0])


def conditional_cdf(joint: EmpiricalJoint, j: int, prefix, x: float) -> float:
    """F_{X_j | X^{j-1}}(x | prefix): right-continuous empirical step CDF."""
    key = joint._prefix_indices(j, prefix)
    idx, cumfrac, _ = joint.cond_table(key)
    pos = int(np.searchsorted(joint.values[j], round_sig(x), side="right"))
    m = int(np.searchsorted(idx, pos, side="left"))  # entries with value index < pos
    if m == 0:
        return 0.0
    return float(cumfrac[m - 1])


# Comparing u against cumulative fractions tolerates 1-ulp excess from the
# forward transform's float addition; real probability gaps are >= 1/n.
_U_TOL = 1e-12


def inverse_conditional_cdf(joint: EmpiricalJoint, j: int, prefix, u: float) -> float:
    """Generalized inverse of the conditional CDF: smallest observed value v
    with F(v | prefix) >= u."""
    if not 0.0 < u <= 1.0:
        raise DomainError(f"u must be in (0, 1], got {u}")
    key = joint._prefix_indices(j, prefix)
    i = _inverse_index(joint, j, key, u)
    return float(joint.values[j][i])


def _inverse_index(joint: EmpiricalJoint, j: int, prefix_idx: tuple, u: float) -> int:
    idx, cumfrac, _ = joint.cond_table(prefix_idx)
    pos = int(np.searchsorted(cumfrac, u - _U_TOL, side="left"))
    pos = min(pos, len(idx) - 1)
    return int(idx[pos])
