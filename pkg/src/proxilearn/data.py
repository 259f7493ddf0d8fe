"""Tabular dataset container and treatment-effect curves.

A :class:`Dataset` holds one sample of (A, X, Z, W, Y) columns. Variable
groups are stored as 2-D float arrays so that multidimensional proxies and
a null covariate set (zero columns) are handled uniformly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class SchemaError(ValueError):
    """Raised when a CSV file does not match the dataset schema."""


def _as_block(values, name: str, n_rows: int | None = None) -> np.ndarray:
    """Coerce a variable group to a 2-D float array of shape (n, d)."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got ndim={arr.ndim}")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise ValueError(
            f"{name} has {arr.shape[0]} rows, expected {n_rows}"
        )
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class Dataset:
    """One tabular sample of treatment, covariates, proxies and outcome.

    Attributes
    ----------
    a : ndarray of shape (n, da)
        Treatment values.
    x : ndarray of shape (n, dx)
        Observed covariates; dx may be 0 (null covariate set).
    z : ndarray of shape (n, dz)
        Treatment-inducing proxy.
    w : ndarray of shape (n, dw)
        Outcome-inducing proxy.
    y : ndarray of shape (n,)
        Outcome.
    """

    a: np.ndarray
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        n = y.shape[0]
        object.__setattr__(self, "a", _as_block(self.a, "a", n))
        object.__setattr__(self, "x", _as_block(self.x, "x", n))
        object.__setattr__(self, "z", _as_block(self.z, "z", n))
        object.__setattr__(self, "w", _as_block(self.w, "w", n))
        if n and not np.isfinite(y).all():
            raise ValueError("y contains non-finite values")
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.a[idx], self.x[idx], self.z[idx],
                       self.w[idx], self.y[idx])

    def split_half(self, seed: int = 0) -> tuple["Dataset", "Dataset"]:
        """Split into two halves by a seeded shuffle (first half smaller
        when n is odd)."""
        rng = np.random.default_rng(seed)
        perm = rng.permutation(self.n)
        m = self.n // 2
        return self.subset(perm[:m]), self.subset(perm[m:])

    def column_names(self) -> list[str]:
        names = ["A"] if self.a.shape[1] == 1 else [
            f"A{i + 1}" for i in range(self.a.shape[1])]
        names += [f"X{i + 1}" for i in range(self.x.shape[1])]
        names += [f"Z{i + 1}" for i in range(self.z.shape[1])]
        names += [f"W{i + 1}" for i in range(self.w.shape[1])]
        names.append("Y")
        return names

    def to_csv(self, path) -> None:
        table = np.column_stack([self.a, self.x, self.z, self.w, self.y])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.column_names())
            for row in table:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        """Load a dataset, reporting schema violations with row/column."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: empty file") from None
            header = [name.strip() for name in header]
            rows = list(reader)

        groups = {"A": [], "X": [], "Z": [], "W": [], "Y": []}
        for col, name in enumerate(header):
            prefix = name[:1].upper()
            suffix = name[1:]
            if prefix not in groups or (suffix and not suffix.isdigit()):
                raise SchemaError(f"{path}: unknown column {name!r}")
            groups[prefix].append((int(suffix) if suffix else 1, col))
        for key in ("A", "Z", "W", "Y"):
            if not groups[key]:
                raise SchemaError(f"{path}: missing column group {key!r}")

        data = np.empty((len(rows), len(header)))
        for i, row in enumerate(rows):
            if len(row) != len(header):
                raise SchemaError(
                    f"{path}: row {i + 2} has {len(row)} cells, "
                    f"expected {len(header)}"
                )
            for j, cell in enumerate(row):
                try:
                    data[i, j] = float(cell)
                except ValueError:
                    raise SchemaError(
                        f"{path}: non-numeric cell at row {i + 2}, "
                        f"column {header[j]!r}: {cell!r}"
                    ) from None

        def block(key):
            cols = [c for _, c in sorted(groups[key])]
            return data[:, cols]

        y = block("Y")
        if y.shape[1] != 1:
            raise SchemaError(f"{path}: expected a single Y column")
        return cls(a=block("A"), x=block("X") if groups["X"] else
                   np.empty((len(rows), 0)), z=block("Z"), w=block("W"),
                   y=y[:, 0])


@dataclass(frozen=True)
class DoCurve:
    """Estimated (and optionally true) interventional means over a grid
    of treatment values."""

    grid: np.ndarray
    estimate: np.ndarray
    truth: np.ndarray | None = field(default=None)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).ravel()
        est = np.asarray(self.estimate, dtype=float).ravel()
        if grid.shape != est.shape:
            raise ValueError("grid and estimate lengths differ")
        if not (np.isfinite(grid).all() and np.isfinite(est).all()):
            raise ValueError("DoCurve values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "estimate", est)
        if self.truth is not None:
            truth = np.asarray(self.truth, dtype=float).ravel()
            if truth.shape != grid.shape:
                raise ValueError("truth length differs from grid")
            if not np.isfinite(truth).all():
                raise ValueError("DoCurve truth must be finite")
            object.__setattr__(self, "truth", truth)

    def with_truth(self, truth: np.ndarray) -> "DoCurve":
        return DoCurve(self.grid, self.estimate, truth)
