"""Loading, labeling and splitting of dense classification datasets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    """Malformed input with the offending line number in the message."""


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix plus integer class labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must have one entry per row")
        if features.size and not np.isfinite(features).all():
            raise ValueError("features must be finite")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def feature_dim(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class BinaryDataset:
    """Dataset whose labels are +1/-1."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must have one entry per row")
        if features.size and not np.isfinite(features).all():
            raise ValueError("features must be finite")
        if labels.size and not np.isin(labels, (-1, 1)).all():
            raise ValueError("binary labels must be +1 or -1")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def feature_dim(self):
        return self.features.shape[1]

    @property
    def n_pos(self):
        return int(np.count_nonzero(self.labels == 1))

    @property
    def n_neg(self):
        return int(np.count_nonzero(self.labels == -1))


def _parse_int(token, lineno, what):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"line {lineno}: non-numeric {what} {token!r}") from None
    if not value.is_integer():
        raise ParseError(f"line {lineno}: {what} {token!r} is not an integer")
    return int(value)


def parse_sparse(lines):
    """Parse index:value sparse lines into a dense Dataset.

    Each nonempty line is ``<label> <index>:<value> ...`` with 1-based,
    strictly increasing indices.  Missing entries fill with 0.0 and the
    feature dimension is the largest index seen anywhere.  An empty stream
    yields a dataset with zero rows.
    """
    labels = []
    rows = []
    dim = 0
    for lineno, line in enumerate(lines, start=1):
        tokens = line.split()
        if not tokens:
            continue
        labels.append(_parse_int(tokens[0], lineno, "label"))
        entries = []
        previous = 0
        for token in tokens[1:]:
            parts = token.split(":")
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: malformed pair {token!r}")
            index = _parse_int(parts[0], lineno, "index")
            if index < 1:
                raise ParseError(f"line {lineno}: index {index} is not positive")
            if index == previous:
                raise ParseError(f"line {lineno}: duplicate index {index}")
            if index < previous:
                raise ParseError(
                    f"line {lineno}: indices must be strictly increasing "
                    f"({index} after {previous})"
                )
            try:
                value = float(parts[1])
            except ValueError:
                raise ParseError(f"line {lineno}: non-numeric value {parts[1]!r}") from None
            if not math.isfinite(value):
                raise ParseError(f"line {lineno}: non-finite value {parts[1]!r}")
            entries.append((index, value))
            previous = index
        rows.append(entries)
        if previous > dim:
            dim = previous
    features = np.zeros((len(rows), dim))
    for i, entries in enumerate(rows):
        for index, value in entries:
            features[i, index - 1] = value
    return Dataset(features=features, labels=np.asarray(labels, dtype=int))


def to_sparse_text(data):
    """Serialize a Dataset back to sparse lines; reparsing reproduces it.

    Zeros are omitted.  When the last column holds no nonzero at all, an
    explicit ``<dim>:0.0`` entry is appended to the first row so the feature
    dimension survives the round trip.
    """
    lines = []
    last_column_used = False
    for i in range(data.n_samples):
        row = data.features[i]
        parts = [str(int(data.labels[i]))]
        for j in np.nonzero(row)[0]:
            parts.append(f"{j + 1}:{float(row[j])!r}")
            if j + 1 == data.feature_dim:
                last_column_used = True
        lines.append(" ".join(parts))
    if data.n_samples and data.feature_dim and not last_column_used:
        lines[0] = f"{lines[0]} {data.feature_dim}:0.0"
    return "\n".join(lines) + ("\n" if lines else "")


def parse_csv(lines, label_column=0):
    """Parse a headerless numeric CSV into a Dataset.

    ``label_column`` picks the integer label column; every other column is a
    feature.  Ragged rows and non-numeric cells are errors.
    """
    labels = []
    rows = []
    width = None
    for lineno, record in enumerate(csv.reader(lines), start=1):
        if not record:
            continue
        if width is None:
            width = len(record)
            if not (0 <= label_column < width):
                raise ParseError(
                    f"label column {label_column} out of range for width {width}"
                )
        elif len(record) != width:
            raise ParseError(
                f"line {lineno}: expected {width} fields, got {len(record)}"
            )
        labels.append(_parse_int(record[label_column], lineno, "label"))
        row = []
        for j, cell in enumerate(record):
            if j == label_column:
                continue
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"line {lineno}: non-numeric cell {cell!r}") from None
            if not math.isfinite(value):
                raise ParseError(f"line {lineno}: non-finite cell {cell!r}")
            row.append(value)
        rows.append(row)
    features = np.asarray(rows, dtype=float) if rows else np.zeros((0, 0))
    return Dataset(features=features, labels=np.asarray(labels, dtype=int))


def binarize_one_vs_all(data, positive_label):
    """Map one class to +1 and every other class to -1."""
    mask = data.labels == positive_label
    if not mask.any():
        raise ValueError(f"positive label {positive_label} does not occur in the data")
    return BinaryDataset(
        features=data.features, labels=np.where(mask, 1, -1)
    )


def split(data, train_fraction, seed):
    """Seeded stratified split of a BinaryDataset into (train, test).

    The training share of each class is rounded up, so a class with a single
    sample always lands in the training part.  The same seed reproduces the
    same partition.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if data.n_pos == 0 or data.n_neg == 0:
        raise ValueError("both classes must be present to split")
    rng = np.random.default_rng(seed)
    train_idx = []
    test_idx = []
    for label in (1, -1):
        members = np.flatnonzero(data.labels == label)
        order = rng.permutation(members)
        k = math.ceil(train_fraction * len(members))
        train_idx.append(order[:k])
        test_idx.append(order[k:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return (
        BinaryDataset(features=data.features[train_idx], labels=data.labels[train_idx]),
        BinaryDataset(features=data.features[test_idx], labels=data.labels[test_idx]),
    )


def load_dataset(path, fmt=None, label_column=0):
    """Read a dataset file; format inferred from the extension unless given."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "libsvm"
    with open(path, encoding="utf-8") as handle:
        if fmt == "csv":
            return parse_csv(handle, label_column=label_column)
        if fmt == "libsvm":
            return parse_sparse(handle)
    raise ValueError(f"unknown dataset format {fmt!r}")
