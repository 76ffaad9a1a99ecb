"""Tabular binary-outcome datasets: loading, imputation, splitting, subsampling.

A :class:`Dataset` stores values in a single float matrix. Numeric features
hold their values directly; categorical features hold the integer index of
the label in their :class:`FeatureSpec.categories` list. Missing values are
NaN for both kinds and survive loading untouched: they are only resolved by
an explicit imputation step.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import DataError, check_binary_labels, check_both_classes, check_fraction

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureSpec:
    """Schema entry for one input column."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    missing_allowed: bool = True

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DataError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL and len(self.categories) == 0:
            raise DataError(f"categorical feature {self.name!r} needs at least one category")
        if self.kind == NUMERIC and len(self.categories) > 0:
            raise DataError(f"numeric feature {self.name!r} must not list categories")
        object.__setattr__(self, "categories", tuple(self.categories))


def _check_schema(features):
    names = [f.name for f in features]
    if len(set(names)) != len(names):
        raise DataError("feature names must be unique")
    return list(features)


@dataclass
class Dataset:
    """Feature matrix plus binary outcome.

    ``X`` is float64 with shape (n, p); categorical columns contain category
    indices, missing entries are NaN. ``y`` holds 0/1 outcomes.
    """

    features: list[FeatureSpec]
    X: np.ndarray
    y: np.ndarray
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.features = _check_schema(self.features)
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.features):
            raise DataError(
                f"X shape {self.X.shape} does not match {len(self.features)} features"
            )
        self.y = check_binary_labels(self.y, n=self.X.shape[0])
        self._index = {f.name: j for j, f in enumerate(self.features)}
        for j, spec in enumerate(self.features):
            if spec.kind == CATEGORICAL:
                col = self.X[:, j]
                codes = col[~np.isnan(col)]
                if codes.size and (codes.min() < 0 or codes.max() >= len(spec.categories)):
                    raise DataError(f"category code out of range in column {spec.name!r}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def feature_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DataError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_index(name)]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.features, self.X[rows].copy(), self.y[rows].copy())

    def has_missing(self) -> bool:
        return bool(np.isnan(self.X).any())

    def same_schema(self, other: "Dataset") -> bool:
        return self.features == other.features


def schema_to_records(features):
    records = []
    for f in features:
        rec = {"name": f.name, "kind": f.kind, "missing_allowed": f.missing_allowed}
        if f.kind == CATEGORICAL:
            rec["categories"] = list(f.categories)
        records.append(rec)
    return records


def schema_from_records(records):
    features = []
    for rec in records:
        features.append(
            FeatureSpec(
                name=rec["name"],
                kind=rec["kind"],
                categories=tuple(rec.get("categories", ())),
                missing_allowed=bool(rec.get("missing_allowed", True)),
            )
        )
    return _check_schema(features)


def save_schema(path, features):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema_to_records(features), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_schema(path):
    with open(path, "r", encoding="utf-8") as fh:
        return schema_from_records(json.load(fh))


def load_csv(path, schema, outcome_column) -> Dataset:
    """Read a UTF-8 comma-separated file into a Dataset.

    The header must consist of exactly the schema names plus the outcome
    column. Empty cells become missing markers (NaN); outcome values must
    parse to 0 or 1.
    """
    schema = _check_schema(schema)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        expected = {f.name for f in schema} | {outcome_column}
        unknown = [c for c in header if c not in expected]
        if unknown:
            raise DataError(f"{path}: unknown column(s) {unknown}")
        missing_cols = sorted(expected - set(header))
        if missing_cols:
            raise DataError(f"{path}: missing column(s) {missing_cols}")
        if outcome_column not in header:
            raise DataError(f"{path}: outcome column {outcome_column!r} not found")
        col_of = {name: header.index(name) for name in header}
        cat_codes = {
            f.name: {label: float(i) for i, label in enumerate(f.categories)}
            for f in schema
            if f.kind == CATEGORICAL
        }

        rows = []
        labels = []
        for line_no, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} cells, got {len(record)}")
            row = np.empty(len(schema))
            for j, spec in enumerate(schema):
                cell = record[col_of[spec.name]].strip()
                if cell == "":
                    row[j] = np.nan
                elif spec.kind == NUMERIC:
                    try:
                        row[j] = float(cell)
                    except ValueError:
                        raise DataError(
                            f"{path}:{line_no}: non-numeric value {cell!r} in column {spec.name!r}"
                        ) from None
                else:
                    try:
                        row[j] = cat_codes[spec.name][cell]
                    except KeyError:
                        raise DataError(
                            f"{path}:{line_no}: unseen category {cell!r} in column {spec.name!r}"
                        ) from None
            out_cell = record[col_of[outcome_column]].strip()
            if out_cell not in ("0", "1"):
                raise DataError(
                    f"{path}:{line_no}: outcome value {out_cell!r} is not 0 or 1"
                )
            rows.append(row)
            labels.append(int(out_cell))

    X = np.array(rows) if rows else np.empty((0, len(schema)))
    return Dataset(schema, X, np.array(labels, dtype=np.int8))


def save_csv(path, dataset: Dataset, outcome_column: str):
    """Write a Dataset back to the CSV format accepted by :func:`load_csv`."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f.name for f in dataset.features] + [outcome_column])
        for i in range(dataset.n):
            cells = []
            for j, spec in enumerate(dataset.features):
                v = dataset.X[i, j]
                if math.isnan(v):
                    cells.append("")
                elif spec.kind == CATEGORICAL:
                    cells.append(spec.categories[int(v)])
                else:
                    cells.append(repr(float(v)))
            cells.append(str(int(dataset.y[i])))
            writer.writerow(cells)


class MeanImputer(BaseEstimator, TransformerMixin):
    """Fill numeric missing values with the column mean, categorical with the mode.

    Categorical mode ties are broken by category order in the feature spec.
    After fitting, ``report_`` lists per-column missing fraction and fill value.
    """

    def fit(self, dataset: Dataset, y=None):
        fill = np.empty(dataset.p)
        report = []
        for j, spec in enumerate(dataset.features):
            col = dataset.X[:, j]
            missing = np.isnan(col)
            observed = col[~missing]
            if observed.size == 0:
                raise DataError(f"column {spec.name!r} is entirely missing")
            if spec.kind == NUMERIC:
                fill[j] = observed.mean()
                display = float(fill[j])
            else:
                counts = np.bincount(observed.astype(int), minlength=len(spec.categories))
                fill[j] = float(np.argmax(counts))  # argmax takes the first max: spec order
                display = spec.categories[int(fill[j])]
            report.append(
                {
                    "feature": spec.name,
                    "missing_fraction": float(missing.mean()),
                    "fill_value": display,
                }
            )
        self.fill_values_ = fill
        self.report_ = report
        self.features_ = list(dataset.features)
        return self

    def transform(self, dataset: Dataset) -> Dataset:
        if dataset.features != self.features_:
            raise DataError("dataset schema differs from the one the imputer was fitted on")
        X = dataset.X.copy()
        for j in range(dataset.p):
            col = X[:, j]
            col[np.isnan(col)] = self.fill_values_[j]
        return Dataset(dataset.features, X, dataset.y.copy())


def impute_mean(dataset: Dataset) -> Dataset:
    """Fit-and-apply mean/mode imputation on a single dataset."""
    return MeanImputer().fit(dataset).transform(dataset)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(dataset: Dataset, train_fraction: float, seed: int):
    """Split into (train, test) preserving the class ratio.

    Per-class train counts round to the nearest integer, ties toward train.
    Deterministic for a given seed; the two parts are disjoint and exhaustive.
    """
    check_fraction(train_fraction, "train_fraction")
    check_both_classes(dataset.y, "stratified_split")
    rng = np.random.default_rng(seed)
    train_rows, test_rows = [], []
    for label in (0, 1):
        idx = np.flatnonzero(dataset.y == label)
        idx = idx[rng.permutation(len(idx))]
        n_train = _round_half_up(len(idx) * train_fraction)
        train_rows.append(idx[:n_train])
        test_rows.append(idx[n_train:])
    train_rows = np.sort(np.concatenate(train_rows))
    test_rows = np.sort(np.concatenate(test_rows))
    return dataset.take(train_rows), dataset.take(test_rows)


def subsample_stratified(dataset: Dataset, n: int, seed: int) -> Dataset:
    """Draw n rows without replacement, preserving the class ratio within one case."""
    if n > dataset.n:
        raise DataError(f"cannot subsample {n} rows from {dataset.n}")
    rng = np.random.default_rng(seed)
    pos = np.flatnonzero(dataset.y == 1)
    neg = np.flatnonzero(dataset.y == 0)
    n_pos = min(_round_half_up(n * len(pos) / dataset.n), len(pos))
    n_neg = n - n_pos
    if n_neg > len(neg):  # rounding pushed past the negative pool
        n_neg = len(neg)
        n_pos = n - n_neg
    chosen = np.concatenate(
        [
            pos[rng.permutation(len(pos))[:n_pos]],
            neg[rng.permutation(len(neg))[:n_neg]],
        ]
    )
    return dataset.take(np.sort(chosen))
