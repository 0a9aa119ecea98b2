"""Tabular data ingestion, empirical per-feature quantile transforms, and
label-correlation trends.

Quantiles follow the right-continuous empirical CDF convention
``Q_i(v) = #{training values of feature i <= v} / n``, so training points map
exactly onto the rank grid ``{1/n, ..., n/n}`` and the pseudo-inverse is a
right inverse on the training support.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    MissingColumn,
    MissingLabels,
    NonBinaryLabel,
    ParseError,
)


class Dataset:
    """Row-major feature matrix with optional binary labels.

    Immutable after construction: the underlying arrays are marked read-only
    so instances can be shared freely across worker threads.

    Parameters
    ----------
    features : array-like of shape (n_rows, m)
        Finite real feature values.
    labels : array-like of shape (n_rows,), optional
        Binary labels in {0, 1}.
    feature_names : sequence of str, optional
        Column names; defaults to ``f0..f{m-1}``.
    """

    def __init__(self, features, labels=None, feature_names=None):
        features = np.array(features, dtype=np.float64)
        if features.ndim != 2:
            raise DimensionMismatch("features must be a 2-D matrix")
        if not np.isfinite(features).all():
            raise ParseError("features contain non-finite entries")
        if labels is not None:
            labels = np.array(labels)
            if labels.shape != (features.shape[0],):
                raise DimensionMismatch(
                    "labels length %d does not match %d rows"
                    % (labels.shape[0] if labels.ndim == 1 else -1, features.shape[0])
                )
            if not np.isin(labels, (0, 1)).all():
                raise NonBinaryLabel("labels must all be 0 or 1")
            labels = labels.astype(np.int8)
            labels.flags.writeable = False
        if feature_names is None:
            feature_names = ["f%d" % i for i in range(features.shape[1])]
        feature_names = list(feature_names)
        if len(feature_names) != features.shape[1]:
            raise DimensionMismatch("feature_names length does not match columns")
        features.flags.writeable = False
        self.features = features
        self.labels = labels
        self.feature_names = feature_names

    @property
    def n_rows(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]


def load_csv(path, has_labels=False, label_column=None):
    """Load a UTF-8, comma-separated, header-first CSV into a Dataset.

    Numeric cells use '.' as the decimal separator and must be finite; label
    cells must parse to exactly 0 or 1. Errors are located by file line
    number (header is line 1) and column name.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", location=str(path)) from None
        label_idx = None
        if has_labels:
            if label_column is None:
                raise MissingColumn("label column name required when has_labels is set")
            try:
                label_idx = header.index(label_column)
            except ValueError:
                raise MissingColumn(
                    "label column %r not in header" % label_column,
                    location="%s:line 1" % path,
                ) from None
        names = [h for i, h in enumerate(header) if i != label_idx]
        if not names:
            raise ParseError("no feature columns", location="%s:line 1" % path)
        rows = []
        labels = [] if has_labels else None
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    "expected %d cells, found %d" % (len(header), len(row)),
                    location="%s:line %d" % (path, line_no),
                )
            values = np.empty(len(names))
            j = 0
            for i, cell in enumerate(row):
                if i == label_idx:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    v = math.nan
                if not math.isfinite(v):
                    raise ParseError(
                        "cell %r is not a finite number" % cell,
                        location="%s:line %d,col %s" % (path, line_no, header[i]),
                    )
                values[j] = v
                j += 1
            if label_idx is not None:
                cell = row[label_idx]
                try:
                    lv = float(cell)
                except ValueError:
                    lv = math.nan
                if lv not in (0.0, 1.0):
                    raise NonBinaryLabel(
                        "label %r is not 0 or 1" % cell,
                        location="%s:line %d,col %s" % (path, line_no, label_column),
                    )
                labels.append(int(lv))
            rows.append(values)
    features = np.array(rows) if rows else np.empty((0, len(names)))
    return Dataset(features, labels=labels, feature_names=names)


class QuantileTransform:
    """Per-feature empirical CDF and its pseudo-inverse.

    ``to_quantile`` maps any real vector into ``[0, 1]^m`` (clamped at the
    extremes); ``from_quantile`` returns, per feature, the smallest training
    value whose rank reaches the requested quantile. Instances are immutable
    and safe for concurrent reads.
    """

    def __init__(self, per_feature_sorted):
        tables = [np.ascontiguousarray(t, dtype=np.float64) for t in per_feature_sorted]
        if not tables or any(t.size == 0 for t in tables):
            raise EmptyDataset("quantile tables must be non-empty")
        n = tables[0].size
        if any(t.size != n for t in tables):
            raise DimensionMismatch("quantile tables must share one length")
        for t in tables:
            if np.any(np.diff(t) < 0):
                raise ParseError("quantile tables must be sorted")
            t.flags.writeable = False
        self.tables = tables
        self.n = n
        # attained ranks 1/n .. n/n; shared by from_quantile lookups
        self._rank_grid = np.arange(1, n + 1, dtype=np.float64) / n
        self._rank_grid.flags.writeable = False

    @property
    def n_features(self):
        return len(self.tables)

    def _check_width(self, width):
        if width != self.n_features:
            raise DimensionMismatch(
                "expected %d features, got %d" % (self.n_features, width)
            )

    def to_quantile(self, x):
        """Map a feature vector to its per-feature empirical quantiles."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionMismatch("expected a 1-D feature vector")
        self._check_width(x.shape[-1])
        q = np.empty(self.n_features)
        for i, t in enumerate(self.tables):
            q[i] = np.searchsorted(t, x[i], side="right") / self.n
        return q

    def to_quantile_matrix(self, X):
        X = np.asarray(X, dtype=np.float64)
        self._check_width(X.shape[1])
        Q = np.empty_like(X)
        for i, t in enumerate(self.tables):
            Q[:, i] = np.searchsorted(t, X[:, i], side="right")
        Q /= self.n
        return Q

    def from_quantile(self, q):
        """Pseudo-inverse: smallest training value with rank >= q, per feature."""
        q = np.asarray(q, dtype=np.float64)
        if q.ndim != 1:
            raise DimensionMismatch("expected a 1-D quantile vector")
        self._check_width(q.shape[-1])
        if np.any(q < 0.0) or np.any(q > 1.0):
            raise ValueError("quantiles must lie in [0, 1]")
        idx = np.searchsorted(self._rank_grid, q, side="left")
        x = np.empty(self.n_features)
        for i, t in enumerate(self.tables):
            x[i] = t[idx[i]]
        return x

    def from_quantile_matrix(self, Q):
        Q = np.asarray(Q, dtype=np.float64)
        self._check_width(Q.shape[1])
        if np.any(Q < 0.0) or np.any(Q > 1.0):
            raise ValueError("quantiles must lie in [0, 1]")
        X = np.empty_like(Q)
        for i, t in enumerate(self.tables):
            X[:, i] = t[np.searchsorted(self._rank_grid, Q[:, i], side="left")]
        return X

    def column_values(self, i, q):
        """from_quantile for many quantiles of one feature."""
        q = np.asarray(q, dtype=np.float64)
        return self.tables[i][np.searchsorted(self._rank_grid, q, side="left")]


def fit_quantile_transform(d):
    """Fit the per-feature empirical quantile transform of a dataset.

    Quantiles are always estimated from the split passed here (the training
    split), including when later applied to test points.
    """
    if d.n_rows == 0:
        raise EmptyDataset("cannot fit quantiles on an empty dataset")
    return QuantileTransform([np.sort(d.features[:, i]) for i in range(d.n_features)])


def pearson_global_trends(d):
    """Sign of the Pearson correlation of each feature column with the labels.

    Zero-variance columns (and zero-variance labels) yield trend 0; the sign
    is invariant to positive affine rescaling of any feature column.
    """
    if d.labels is None:
        raise MissingLabels("global trends require labels")
    y = d.labels.astype(np.float64)
    yc = y - y.mean()
    out = np.zeros(d.n_features, dtype=np.int8)
    if np.ptp(y) == 0:
        return out
    for i in range(d.n_features):
        col = d.features[:, i]
        if np.ptp(col) == 0:
            continue
        cov = float((col - col.mean()) @ yc)
        if cov > 0:
            out[i] = 1
        elif cov < 0:
            out[i] = -1
    return out
