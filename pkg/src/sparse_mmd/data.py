"""Dataset container and the CSV exchange format.

Files carry a header row ``y,x1,...,xp`` followed by one observation per
line. Floats are written with ``repr`` so that a write/read round trip is
exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolation, NumericInputError

FAMILIES = ("gaussian", "binomial")


class CsvFormatError(ContractViolation):
    """A CSV file does not follow the ``y,x1..xp`` layout."""


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``X`` (n x p), response ``y`` (n,) and family tag."""

    X: np.ndarray
    y: np.ndarray
    family: str = "gaussian"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ContractViolation(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise ContractViolation(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} entries"
            )
        if self.family not in FAMILIES:
            raise ContractViolation(f"unknown family {self.family!r}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise NumericInputError("dataset contains non-finite values")
        if self.family == "binomial":
            bad = np.flatnonzero((y != 0.0) & (y != 1.0))
            if bad.size:
                raise ContractViolation(
                    f"binomial response must be 0/1; row {bad[0] + 1} has y={y[bad[0]]!r}"
                )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx], self.family)

    def require(self, family: str) -> None:
        if self.family != family:
            raise ContractViolation(f"expected a {family} dataset, got {self.family}")
        if self.n < 1:
            raise ContractViolation("dataset is empty")


def csv_write(dataset: Dataset, path) -> None:
    """Write ``dataset`` as ``y,x1,...,xp`` CSV (UTF-8, comma separated)."""
    path = Path(path)
    header = ["y"] + [f"x{j + 1}" for j in range(dataset.p)]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for yi, row in zip(dataset.y, dataset.X):
            writer.writerow([repr(float(yi))] + [repr(float(v)) for v in row])


def csv_read(path, family: str = "gaussian") -> Dataset:
    """Read a dataset written in the ``y,x1,...,xp`` layout.

    Raises:
        CsvFormatError: on a bad header, ragged rows, unparsable or
            non-finite cells, or non-binary labels for ``family="binomial"``.
            Messages carry the 1-based file line number.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{path}: empty file, expected header 'y,x1,...,xp'")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "y":
        raise CsvFormatError(
            f"{path}: line 1: first column must be named 'y', got {header[:1]}"
        )
    p = len(header) - 1
    expected = [f"x{j + 1}" for j in range(p)]
    if p < 1 or header[1:] != expected:
        raise CsvFormatError(f"{path}: line 1: predictor columns must be x1..x{max(p, 1)}")
    body = [(lineno, r) for lineno, r in enumerate(rows[1:], start=2) if r]
    if not body:
        raise CsvFormatError(f"{path}: no data rows")
    values = np.empty((len(body), p + 1))
    for k, (lineno, row) in enumerate(body):
        if len(row) != p + 1:
            raise CsvFormatError(
                f"{path}: line {lineno}: expected {p + 1} fields, got {len(row)}"
            )
        for col, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: line {lineno}, column {header[col]}: cannot parse {cell!r}"
                ) from None
            if not math.isfinite(v):
                raise CsvFormatError(
                    f"{path}: line {lineno}, column {header[col]}: non-finite value {cell!r}"
                )
            values[k, col] = v
        if family == "binomial" and values[k, 0] not in (0.0, 1.0):
            raise CsvFormatError(
                f"{path}: line {lineno}: binomial response must be 0 or 1, got {row[0]!r}"
            )
    return Dataset(values[:, 1:], values[:, 0], family)
