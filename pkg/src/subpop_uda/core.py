"""Dataset model, CSV ingestion/writing, validation and cell counting.

A row carries features ``x`` (length ``q``), a background flag ``a``, a domain
flag ``r`` (1 = labeled source, 0 = unlabeled target) and a label ``y`` that
is present exactly when ``r == 1``. Internally a missing label is stored as
``-1`` in an int8 array; it is never written as a number.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from .errors import (
    DataError,
    DimensionError,
    EmptyDatasetError,
    ParseError,
    StructuredMissingnessError,
)

MISSING = -1


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    a: int
    r: int
    y: Optional[int] = None

    def __post_init__(self):
        if (self.y is None) == (self.r == 1):
            raise DataError("label must be present iff r == 1")


def _readonly(arr, dtype):
    arr = np.array(arr, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column store of samples.

    ``y`` uses ``-1`` for the missing labels of target rows.
    """

    X: np.ndarray
    r: np.ndarray
    y: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError(f"features must be 2-D, got shape {X.shape}")
        n = X.shape[0]
        for name in ("r", "y", "a"):
            col = np.asarray(getattr(self, name))
            if col.shape != (n,):
                raise DimensionError(f"column {name!r} has shape {col.shape}, expected ({n},)")
        object.__setattr__(self, "X", _readonly(X, np.float64))
        for name in ("r", "y", "a"):
            object.__setattr__(self, name, _readonly(getattr(self, name), np.int8))
        if not np.all(np.isin(self.r, (0, 1))) or not np.all(np.isin(self.a, (0, 1))):
            raise DataError("r and a must be binary")
        if not np.all(np.isin(self.y, (MISSING, 0, 1))):
            raise DataError("y must be 0, 1 or missing")
        bad = np.flatnonzero((self.y == MISSING) == (self.r == 1))
        if bad.size:
            raise DataError(f"label must be present iff r == 1 (rows {bad[:10].tolist()})")

    @classmethod
    def empty(cls, q: int) -> "Dataset":
        z = np.zeros(0, dtype=np.int8)
        return cls(np.zeros((0, q)), z, z, z)

    @classmethod
    def from_samples(cls, samples: Iterable[Sample], q: Optional[int] = None) -> "Dataset":
        samples = list(samples)
        if not samples:
            if q is None:
                raise EmptyDatasetError("cannot infer dimension from zero samples")
            return cls.empty(q)
        q = len(samples[0].features) if q is None else q
        for i, s in enumerate(samples):
            if len(s.features) != q:
                raise DimensionError(f"sample {i} has dimension {len(s.features)}, expected {q}")
        X = np.array([np.asarray(s.features, dtype=np.float64) for s in samples]).reshape(len(samples), q)
        y = [MISSING if s.y is None else s.y for s in samples]
        return cls(X, [s.r for s in samples], y, [s.a for s in samples])

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def q(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, i) -> Sample:
        y = int(self.y[i])
        return Sample(self.X[i], int(self.a[i]), int(self.r[i]), None if y == MISSING else y)

    def __iter__(self) -> Iterator[Sample]:
        for i in range(self.n):
            yield self[i]

    @property
    def samples(self) -> list:
        return list(self)

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(self.X[index], self.r[index], self.y[index], self.a[index])

    def mask(self, r=None, y=None, a=None) -> np.ndarray:
        m = np.ones(self.n, dtype=bool)
        if r is not None:
            m &= self.r == r
        if y is not None:
            m &= self.y == y
        if a is not None:
            m &= self.a == a
        return m


def subset(ds: Dataset, predicate: Callable[[int, Optional[int], int], bool]) -> Dataset:
    """Rows whose ``(r, y, a)`` satisfy ``predicate``; order is preserved.

    ``y`` is passed as ``None`` for unlabeled rows.
    """
    keep = [
        i for i in range(ds.n)
        if predicate(int(ds.r[i]), None if ds.y[i] == MISSING else int(ds.y[i]), int(ds.a[i]))
    ]
    return ds.take(np.asarray(keep, dtype=np.intp))


def select(ds: Dataset, r=None, y=None, a=None) -> Dataset:
    """Vectorised :func:`subset` for the common equality predicates."""
    return ds.take(np.flatnonzero(ds.mask(r=r, y=y, a=a)))


# -- counting & validation --------------------------------------------------

@dataclass(frozen=True)
class CellCounts:
    n110: int = 0
    n101: int = 0
    n100: int = 0
    n1: int = 0
    n0_dot1: int = 0
    n0_dot0: int = 0
    n0: int = 0
    n: int = 0
    # source rows in the forbidden cell; excluded from n1 and n
    n111: int = 0


def cell_counts(ds: Dataset) -> CellCounts:
    src = ds.r == 1
    tgt = ~src
    n110 = int(np.sum(src & (ds.y == 1) & (ds.a == 0)))
    n101 = int(np.sum(src & (ds.y == 0) & (ds.a == 1)))
    n100 = int(np.sum(src & (ds.y == 0) & (ds.a == 0)))
    n111 = int(np.sum(src & (ds.y == 1) & (ds.a == 1)))
    n0_dot1 = int(np.sum(tgt & (ds.a == 1)))
    n0_dot0 = int(np.sum(tgt & (ds.a == 0)))
    n1 = n110 + n101 + n100
    n0 = n0_dot1 + n0_dot0
    return CellCounts(n110, n101, n100, n1, n0_dot1, n0_dot0, n0, n1 + n0, n111)


REQUIRED_CELLS = {
    "source (y=1, a=0)": "n110",
    "source (y=0, a=1)": "n101",
    "source (y=0, a=0)": "n100",
    "target a=1": "n0_dot1",
    "target a=0": "n0_dot0",
}


@dataclass
class ValidationReport:
    counts: dict
    warnings: list = field(default_factory=list)
    forbidden_rows: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.warnings and not self.forbidden_rows


def validate(ds: Dataset, allow_forbidden_cell: bool = False) -> ValidationReport:
    """Count rows per ``(r, y, a)`` cell and check the empty-cell constraint.

    Raises :class:`StructuredMissingnessError` when a source row has
    ``y = 1, a = 1`` unless ``allow_forbidden_cell`` is set, in which case the
    offending rows are reported with a warning instead.
    """
    counts = {}
    for r in (1, 0):
        for y in ((0, 1) if r == 1 else (None,)):
            for a in (0, 1):
                yv = MISSING if y is None else y
                counts[(r, y, a)] = int(np.sum((ds.r == r) & (ds.y == yv) & (ds.a == a)))
    bad = np.flatnonzero((ds.r == 1) & (ds.y == 1) & (ds.a == 1)).tolist()
    if bad and not allow_forbidden_cell:
        raise StructuredMissingnessError(bad)
    report = ValidationReport(counts=counts, forbidden_rows=bad)
    if bad:
        report.warnings.append(f"{len(bad)} source row(s) in the (y=1, a=1) cell were allowed")
    cc = cell_counts(ds)
    for label, attr in REQUIRED_CELLS.items():
        if getattr(cc, attr) == 0:
            report.warnings.append(f"cell {label} is empty")
    return report


# -- CSV --------------------------------------------------------------------

def _parse_flag(text, name, row):
    text = text.strip()
    if text not in ("0", "1"):
        raise ParseError(f"{name} must be 0 or 1, got {text!r}", row)
    return int(text)


def load_csv(path, has_header: Optional[bool] = None, allow_forbidden_cell: bool = False) -> Dataset:
    """Read ``r,y,a,x1,...,xq`` rows.

    ``has_header=None`` detects a header by a non-numeric first field. The
    loaded dataset is validated; pass ``allow_forbidden_cell=True`` for
    fully labeled pools that legitimately contain ``(y=1, a=1)`` rows.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh)) if any(c.strip() for c in row)]
    if rows and (has_header or (has_header is None and rows[0][1][0].strip() not in ("0", "1"))):
        rows = rows[1:]
    if not rows:
        raise EmptyDatasetError(f"{path}: no data rows")

    ncol = len(rows[0][1])
    if ncol < 4:
        raise ParseError(f"expected at least 4 columns (r,y,a,x1), got {ncol}", rows[0][0])
    q = ncol - 3
    X = np.empty((len(rows), q))
    r = np.empty(len(rows), dtype=np.int8)
    y = np.empty(len(rows), dtype=np.int8)
    a = np.empty(len(rows), dtype=np.int8)
    for k, (lineno, row) in enumerate(rows):
        if len(row) != ncol:
            raise ParseError(f"expected {ncol} columns, got {len(row)}", lineno)
        r[k] = _parse_flag(row[0], "r", lineno)
        a[k] = _parse_flag(row[2], "a", lineno)
        ytxt = row[1].strip()
        if r[k] == 1:
            if not ytxt:
                raise ParseError("source row is missing its label", lineno)
            y[k] = _parse_flag(ytxt, "y", lineno)
        else:
            if ytxt:
                raise ParseError("target row must not carry a label", lineno)
            y[k] = MISSING
        for j, cell in enumerate(row[3:]):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric feature x{j + 1}: {cell!r}", lineno) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite feature x{j + 1}: {cell!r}", lineno)
            X[k, j] = v
    ds = Dataset(X, r, y, a)
    validate(ds, allow_forbidden_cell=allow_forbidden_cell)
    return ds


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(ds: Dataset, path) -> None:
    """Write the dataset in the layout read by :func:`load_csv` (17 significant digits)."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "y", "a"] + [f"x{j + 1}" for j in range(ds.q)])
        for i in range(ds.n):
            y = "" if ds.y[i] == MISSING else str(int(ds.y[i]))
            w.writerow([str(int(ds.r[i])), y, str(int(ds.a[i]))] + [_fmt(v) for v in ds.X[i]])


def write_truth(truth: dict, path) -> None:
    """Ground-truth side table ``row_index,y_true``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_index", "y_true"])
        for idx in sorted(truth):
            w.writerow([idx, int(truth[idx])])


def load_truth(path) -> dict:
    out = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or {"row_index", "y_true"} - set(reader.fieldnames):
            raise ParseError(f"{path}: expected header row_index,y_true")
        for lineno, row in enumerate(reader, start=2):
            try:
                out[int(row["row_index"])] = _parse_flag(row["y_true"], "y_true", lineno)
            except ValueError:
                raise ParseError(f"bad row_index {row['row_index']!r}", lineno) from None
    return out
