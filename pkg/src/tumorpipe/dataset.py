"""Labeled feature matrices, CSV round-tripping, and stratified fold assignment."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "LabeledDataset",
    "FeatureTable",
    "CsvFormatError",
    "read_feature_csv",
    "write_feature_csv",
    "format_real",
    "stratified_folds",
]

LABEL_COLUMN = "label"


def format_real(v: float) -> str:
    """Text form used in every report and CSV: 9 significant digits."""
    return f"{float(v):.9g}"


@dataclass(frozen=True)
class LabeledDataset:
    """Samples x features matrix with integer class ids ``0 .. c-1``."""

    matrix: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    label_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "label_names", tuple(self.label_names))
        if matrix.shape[0] != labels.shape[0]:
            raise ValueError(f"{matrix.shape[0]} rows but {labels.shape[0]} labels")
        if matrix.shape[1] != len(self.feature_names):
            raise ValueError(
                f"{matrix.shape[1]} columns but {len(self.feature_names)} feature names"
            )
        if not np.all(np.isfinite(matrix)):
            raise ValueError("dataset contains NaN or infinite entries")
        if labels.size and labels.min() < 0:
            raise ValueError("class ids must be non-negative")
        if self.label_names and labels.size and labels.max() >= len(self.label_names):
            raise ValueError("class id outside the label dictionary")

    @property
    def n_samples(self):
        return self.matrix.shape[0]

    @property
    def n_features(self):
        return self.matrix.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    @property
    def n_classes(self):
        if self.label_names:
            return len(self.label_names)
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def subset(self, rows=None, columns=None) -> "LabeledDataset":
        rows = slice(None) if rows is None else np.asarray(rows)
        cols = np.arange(self.n_features) if columns is None else np.asarray(columns, dtype=np.int64)
        return LabeledDataset(
            self.matrix[rows][:, cols],
            self.labels[rows],
            tuple(self.feature_names[c] for c in cols),
            self.label_names,
        )

    def with_labels(self, labels) -> "LabeledDataset":
        return LabeledDataset(self.matrix, labels, self.feature_names, self.label_names)


class CsvFormatError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class FeatureTable:
    """Raw CSV contents: a numeric block plus the optional label strings."""

    feature_names: tuple[str, ...]
    matrix: np.ndarray
    labels: tuple[str, ...] | None

    def to_dataset(self, label_names=None) -> LabeledDataset:
        """Resolve label strings to ids (sorted lexicographically by default)."""
        if self.labels is None:
            raise CsvFormatError(f"no '{LABEL_COLUMN}' column")
        names = tuple(label_names) if label_names else tuple(sorted(set(self.labels)))
        index = {name: i for i, name in enumerate(names)}
        missing = sorted(set(self.labels) - set(index))
        if missing:
            raise CsvFormatError(f"unknown labels {missing}")
        ids = np.array([index[s] for s in self.labels], dtype=np.int64)
        return LabeledDataset(self.matrix, ids, self.feature_names, names)


def _parse_real(token, line, column):
    try:
        v = float(token)
    except ValueError:
        raise CsvFormatError(f"column {column!r}: not a number: {token!r}", line) from None
    if not math.isfinite(v):
        raise CsvFormatError(f"column {column!r}: non-finite value {token!r}", line)
    return v


def read_feature_csv(path_or_text, require_label: bool = True) -> FeatureTable:
    """Parse a feature CSV; a ``label`` column, if present, must be last."""
    if isinstance(path_or_text, (str, Path)) and "\n" not in str(path_or_text):
        text = Path(path_or_text).read_text()
    else:
        text = str(path_or_text)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise CsvFormatError("empty CSV", 1)
    header = [h.strip() for h in rows[0]]
    has_label = bool(header) and header[-1] == LABEL_COLUMN
    if require_label and not has_label:
        raise CsvFormatError(f"last header column must be '{LABEL_COLUMN}'", 1)
    names = header[:-1] if has_label else header
    if not names:
        raise CsvFormatError("no feature columns", 1)
    if len(set(names)) != len(names):
        raise CsvFormatError("duplicate feature names in header", 1)
    values, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise CsvFormatError(
                f"ragged row: expected {len(header)} fields, got {len(row)}", lineno
            )
        fields = row[:-1] if has_label else row
        values.append([_parse_real(tok, lineno, col) for tok, col in zip(fields, names)])
        if has_label:
            labels.append(row[-1].strip())
    matrix = np.array(values, dtype=np.float64).reshape(len(values), len(names))
    return FeatureTable(tuple(names), matrix, tuple(labels) if has_label else None)


def write_feature_csv(path, feature_names, matrix, labels=None) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(feature_names) + ([LABEL_COLUMN] if labels is not None else [])
    writer.writerow(header)
    for i, row in enumerate(np.asarray(matrix, dtype=np.float64)):
        out = [format_real(v) for v in row]
        if labels is not None:
            out.append(labels[i])
        writer.writerow(out)
    Path(path).write_text(buf.getvalue())


def stratified_folds(labels, k: int, seed: int = 0) -> np.ndarray:
    """Fold index per sample.

    Each class is shuffled and dealt round-robin, continuing the deal across
    classes, so fold sizes differ by at most one overall and per class.
    """
    labels = np.asarray(labels)
    n = labels.size
    if not 2 <= k <= n:
        raise ValueError(f"k must lie in [2, {n}], got {k}")
    classes, counts = np.unique(labels, return_counts=True)
    if counts.min() < 2:
        small = classes[counts < 2].tolist()
        raise ValueError(f"classes {small} have fewer than 2 samples; cannot stratify")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=np.int64)
    pos = 0
    for cls in classes:
        idx = rng.permutation(np.flatnonzero(labels == cls))
        folds[idx] = (pos + np.arange(idx.size)) % k
        pos += idx.size
    return folds
