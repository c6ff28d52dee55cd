"""CSV ingestion: cleaning, one-hot encoding, min-max normalization, splits.

The pipeline is: load -> drop unusable rows -> deterministic 60/20/20 split
-> fit the encoder on the training rows only -> transform every split.
Feature values always land in [0, 1] (values outside the training range are
clipped), which keeps extracted rule thresholds readable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .core import FeatureMatrix
from .errors import (
    EmptyDatasetError,
    LabelOutOfRangeError,
    LengthMismatchError,
    MissingLabelColumnError,
    RaggedRowError,
    TooFewRowsError,
    UnknownCategoryError,
)

TRAIN_FRACTION = 0.6
VAL_FRACTION = 0.2


@dataclass
class RawTable:
    """Parsed CSV with all cells kept as strings."""

    headers: list[str]
    cells: list[list[str]]
    label_col: str

    @property
    def rows(self) -> int:
        return len(self.cells)

    def column(self, name: str) -> list[str]:
        i = self.headers.index(name)
        return [row[i] for row in self.cells]

    def drop_columns(self, names) -> "RawTable":
        names = set(names)
        if self.label_col in names:
            raise MissingLabelColumnError("cannot drop the label column")
        keep = [i for i, h in enumerate(self.headers) if h not in names]
        return RawTable(
            [self.headers[i] for i in keep],
            [[row[i] for i in keep] for row in self.cells],
            self.label_col,
        )


@dataclass
class ColumnTransform:
    name: str
    kind: str  # "categorical" | "numeric"
    values: list[str] | None = None  # categories seen at fit time, sorted
    vmin: float | None = None
    vmax: float | None = None


@dataclass
class EncoderSpec:
    """Fitted per-column transforms plus the label value mapping."""

    columns: list[ColumnTransform]
    label_col: str
    label_values: list[str]

    @property
    def class_count(self) -> int:
        return len(self.label_values)

    def feature_names(self) -> list[str]:
        names = []
        for col in self.columns:
            if col.kind == "categorical":
                names += [f"{col.name}={v}" for v in col.values]
            else:
                names.append(col.name)
        return names

    def to_json_dict(self) -> dict:
        return {
            "label_col": self.label_col,
            "label_values": self.label_values,
            "columns": [
                {"name": c.name, "kind": c.kind, "values": c.values,
                 "min": c.vmin, "max": c.vmax}
                for c in self.columns
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "EncoderSpec":
        cols = [
            ColumnTransform(c["name"], c["kind"], c["values"], c["min"], c["max"])
            for c in d["columns"]
        ]
        return cls(cols, d["label_col"], d["label_values"])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "EncoderSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class DatasetBundle:
    train: tuple[FeatureMatrix, np.ndarray]
    val: tuple[FeatureMatrix, np.ndarray]
    test: tuple[FeatureMatrix, np.ndarray]
    class_count: int
    encoder_spec: EncoderSpec | None = None


def load_csv(path, label_col: str) -> RawTable:
    """Parse a CSV file; cells stay strings. Raises on missing label column
    or rows whose arity differs from the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            headers = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path}: no header row")
        headers = [h.strip() for h in headers]
        if label_col not in headers:
            raise MissingLabelColumnError(
                f"{path}: no column {label_col!r} in header {headers}"
            )
        cells = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue  # blank line
            if len(row) != len(headers):
                raise RaggedRowError(lineno, len(headers), len(row))
            cells.append(row)
    return RawTable(headers, cells, label_col)


def drop_incomplete(table: RawTable) -> RawTable:
    """Remove rows that cannot be used downstream.

    A row is dropped when any cell is empty, or when a cell in a numeric
    column is non-finite or unparseable. A non-label column counts as
    numeric when every non-empty cell in it parses as a float; anything
    else is categorical and its cells are kept verbatim.
    """
    label_idx = table.headers.index(table.label_col)
    numeric_cols = []
    for i in range(len(table.headers)):
        if i == label_idx:
            continue
        parses = True
        for row in table.cells:
            cell = row[i].strip()
            if cell == "":
                continue
            try:
                float(cell)
            except ValueError:
                parses = False
                break
        if parses:
            numeric_cols.append(i)

    kept = []
    for row in table.cells:
        ok = True
        for i, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                ok = False
                break
            if i in numeric_cols and not np.isfinite(float(cell)):
                ok = False
                break
        if ok:
            kept.append(row)
    if not kept:
        raise EmptyDatasetError("all rows removed while cleaning")
    return RawTable(table.headers, kept, table.label_col)


def fit_encoder(table: RawTable, categorical_cols, rows=None) -> EncoderSpec:
    """Fit per-column transforms on the given row indices (default: all).

    Categorical columns map each distinct value to a 0/1 column; numeric
    columns record min/max for scaling. The label mapping is fitted on all
    rows (it is a vocabulary, not a statistic)."""
    categorical_cols = list(categorical_cols)
    feature_headers = [h for h in table.headers if h != table.label_col]
    unknown = set(categorical_cols) - set(feature_headers)
    if unknown:
        raise ValueError(f"categorical columns not in table: {sorted(unknown)}")
    if rows is None:
        rows = range(table.rows)
    columns = []
    for name in feature_headers:
        idx = table.headers.index(name)
        cells = [table.cells[r][idx].strip() for r in rows]
        if name in categorical_cols:
            columns.append(
                ColumnTransform(name, "categorical", values=sorted(set(cells)))
            )
        else:
            vals = np.array([float(c) for c in cells])
            columns.append(
                ColumnTransform(name, "numeric",
                                vmin=float(vals.min()), vmax=float(vals.max()))
            )
    label_values = sorted(set(v.strip() for v in table.column(table.label_col)))
    return EncoderSpec(columns, table.label_col, label_values)


def apply_encoder(spec: EncoderSpec, table: RawTable,
                  strict: bool = False) -> tuple[FeatureMatrix, np.ndarray]:
    """Transform a cleaned table with a fitted encoder.

    Unseen categories encode as all-zeros, or raise in strict mode. Numeric
    values are min-max scaled with the fitted statistics and clipped to
    [0, 1]; constant columns map to 0.0.
    """
    n = table.rows
    names = spec.feature_names()
    X = np.zeros((n, len(names)))
    col_start = 0
    for tcol in spec.columns:
        idx = table.headers.index(tcol.name)
        if tcol.kind == "categorical":
            mapping = {v: j for j, v in enumerate(tcol.values)}
            for r in range(n):
                cell = table.cells[r][idx].strip()
                j = mapping.get(cell)
                if j is None:
                    if strict:
                        raise UnknownCategoryError(
                            f"column {tcol.name!r}: unseen value {cell!r}"
                        )
                    continue  # all-zeros row for this block
                X[r, col_start + j] = 1.0
            col_start += len(tcol.values)
        else:
            vals = np.array([float(table.cells[r][idx]) for r in range(n)])
            span = tcol.vmax - tcol.vmin
            if span > 0:
                X[:, col_start] = np.clip((vals - tcol.vmin) / span, 0.0, 1.0)
            # constant column stays 0.0
            col_start += 1

    label_idx = table.headers.index(spec.label_col)
    label_map = {v: j for j, v in enumerate(spec.label_values)}
    y = np.empty(n, dtype=np.int64)
    for r in range(n):
        cell = table.cells[r][label_idx].strip()
        if cell not in label_map:
            raise LabelOutOfRangeError(f"unseen label value {cell!r}")
        y[r] = label_map[cell]
    return FeatureMatrix(X, names), y


def encode_and_normalize(table: RawTable, categorical_cols):
    """Fit on the whole table and transform it (single-table convenience)."""
    spec = fit_encoder(table, categorical_cols)
    X, y = apply_encoder(spec, table)
    return X, y, spec


def split_indices(n: int, seed: int):
    """Seeded shuffle, then contiguous 60/20/20 cut of row indices."""
    if n < 5:
        raise TooFewRowsError(f"need at least 5 rows to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(n * TRAIN_FRACTION)
    n_val = int(n * VAL_FRACTION)
    return (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])


def split(matrix: FeatureMatrix, labels, seed: int,
          encoder_spec: EncoderSpec | None = None) -> DatasetBundle:
    """Split an already-encoded matrix into train/val/test parts."""
    labels = np.asarray(labels, dtype=np.int64)
    if matrix.rows != len(labels):
        raise LengthMismatchError(f"{matrix.rows} rows but {len(labels)} labels")
    tr, va, te = split_indices(matrix.rows, seed)
    parts = [
        (FeatureMatrix(matrix.values[idx], matrix.col_names), labels[idx])
        for idx in (tr, va, te)
    ]
    class_count = int(labels.max()) + 1 if len(labels) else 0
    return DatasetBundle(parts[0], parts[1], parts[2],
                         class_count=class_count, encoder_spec=encoder_spec)


def build_bundle(table: RawTable, categorical_cols, seed: int,
                 drop_cols=()) -> DatasetBundle:
    """Full preprocessing: clean, split on raw rows, fit encoder on the
    training rows only, transform each split with the same encoder."""
    if drop_cols:
        table = table.drop_columns(drop_cols)
    table = drop_incomplete(table)
    tr, va, te = split_indices(table.rows, seed)
    spec = fit_encoder(table, categorical_cols, rows=tr)
    parts = []
    for idx in (tr, va, te):
        sub = RawTable(table.headers, [table.cells[i] for i in idx],
                       table.label_col)
        parts.append(apply_encoder(spec, sub))
    return DatasetBundle(parts[0], parts[1], parts[2],
                         class_count=spec.class_count, encoder_spec=spec)


def one_hot_labels(labels, k: int) -> np.ndarray:
    """(n, k) one-hot matrix; raises when a label is outside [0, k)."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        bad = labels[(labels < 0) | (labels >= k)][0]
        raise LabelOutOfRangeError(f"label {bad} outside [0, {k})")
    out = np.zeros((len(labels), k))
    out[np.arange(len(labels)), labels] = 1.0
    return out
