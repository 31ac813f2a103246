"""Panel container and CSV I/O.

A panel holds m input rows and s output rows over n decision making units
(DMUs), all strictly positive. Inputs are stored inputs-by-columns (m x n),
matching the multiplier algebra in `dea` and `grouplasso`; the estimator
layer converts from the samples-as-rows convention.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError


@dataclass(frozen=True)
class DataSet:
    """Immutable DEA panel: X (m x n) inputs, Y (s x n) outputs, labels."""

    X: np.ndarray
    Y: np.ndarray
    input_labels: tuple
    output_labels: tuple

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if X.ndim != 2 or Y.ndim != 2:
            raise InputError("X and Y must be matrices")
        if X.shape[1] != Y.shape[1]:
            raise InputError(
                f"X has {X.shape[1]} DMUs but Y has {Y.shape[1]}"
            )
        if X.shape[0] < 1 or Y.shape[0] < 1 or X.shape[1] < 1:
            raise InputError("need at least one input, one output, one DMU")
        for name, M in (("X", X), ("Y", Y)):
            if not np.all(np.isfinite(M)):
                raise InputError(f"{name} contains non-finite entries")
            if np.any(M <= 0):
                raise InputError(f"{name} entries must be strictly positive")
        in_labels = tuple(str(v) for v in self.input_labels)
        out_labels = tuple(str(v) for v in self.output_labels)
        if len(in_labels) != X.shape[0]:
            raise InputError(
                f"{len(in_labels)} input labels for {X.shape[0]} input rows"
            )
        if len(out_labels) != Y.shape[0]:
            raise InputError(
                f"{len(out_labels)} output labels for {Y.shape[0]} output rows"
            )
        X.flags.writeable = False
        Y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "input_labels", in_labels)
        object.__setattr__(self, "output_labels", out_labels)

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def s(self) -> int:
        return self.Y.shape[0]

    @classmethod
    def from_arrays(cls, X, Y, input_labels=None, output_labels=None) -> "DataSet":
        """Build a panel, defaulting labels to x1..xm / y1..ys."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if input_labels is None:
            input_labels = tuple(f"x{i + 1}" for i in range(X.shape[0]))
        if output_labels is None:
            output_labels = tuple(f"y{r + 1}" for r in range(Y.shape[0]))
        return cls(X, Y, tuple(input_labels), tuple(output_labels))

    def subset_inputs(self, inputs) -> "DataSet":
        """Panel restricted to the given input row indices (order kept)."""
        idx = normalize_input_subset(inputs, self.m)
        return DataSet(
            self.X[idx, :],
            self.Y,
            tuple(self.input_labels[i] for i in idx),
            self.output_labels,
        )

    def take_dmus(self, indices) -> "DataSet":
        """Panel restricted to the given DMU columns (order kept)."""
        idx = np.asarray(indices, dtype=int)
        if idx.ndim != 1 or idx.size < 1:
            raise InputError("DMU index list must be a non-empty 1-d sequence")
        if np.any(idx < 0) or np.any(idx >= self.n):
            raise InputError("DMU index out of range")
        return DataSet(
            self.X[:, idx], self.Y[:, idx], self.input_labels, self.output_labels
        )


def normalize_input_subset(inputs, m) -> tuple:
    """Validate an input-index subset; None means all inputs."""
    if inputs is None:
        return tuple(range(m))
    idx = tuple(int(i) for i in inputs)
    if len(idx) == 0:
        raise InputError("input subset must be non-empty")
    if len(set(idx)) != len(idx):
        raise InputError(f"duplicate input indices in {idx}")
    for i in idx:
        if i < 0 or i >= m:
            raise InputError(f"input index {i} out of range for m={m}")
    return idx


def write_panel_csv(data: DataSet, path) -> None:
    """Write a panel: header `in:<label>`/`out:<label>`, one DMU per row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [f"in:{lbl}" for lbl in data.input_labels]
            + [f"out:{lbl}" for lbl in data.output_labels]
        )
        for k in range(data.n):
            writer.writerow(
                [repr(float(v)) for v in data.X[:, k]]
                + [repr(float(v)) for v in data.Y[:, k]]
            )


def read_panel_csv(path) -> DataSet:
    """Read a panel written by `write_panel_csv` (or hand-built to match)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty panel file") from None
        in_labels, out_labels = [], []
        for col in header:
            name = col.strip()
            if name.startswith("in:"):
                if out_labels:
                    raise InputError(f"{path}: input column {name!r} after outputs")
                in_labels.append(name[3:])
            elif name.startswith("out:"):
                out_labels.append(name[4:])
            else:
                raise InputError(
                    f"{path}: column {name!r} must start with 'in:' or 'out:'"
                )
        if not in_labels or not out_labels:
            raise InputError(f"{path}: need at least one input and one output column")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}:{lineno}: {len(row)} cells, expected {len(header)}"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric cell") from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float).T
    m = len(in_labels)
    return DataSet(table[:m, :], table[m:, :], tuple(in_labels), tuple(out_labels))
