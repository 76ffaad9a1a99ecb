"""Gradient-boosted shallow regression trees under binomial logistic loss.

Each round fits a depth-limited least-squares tree to the negative gradient
of the logistic loss on a row/column subsample, then sets leaf values by a
Newton step (sum of residuals over sum of hessians). Split search is an
exact scan: midpoint thresholds over sorted unique numeric values, and
prefix subsets of categories ordered by mean residual for categorical
features. Ties break to the lowest feature index, then lowest threshold,
so fitting is fully deterministic for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .data import CATEGORICAL, Dataset, FeatureSpec
from .validation import DataError, check_both_classes

HESSIAN_FLOOR = 1e-6
MIN_GAIN = 1e-12


@dataclass
class GbmConfig:
    n_trees: int = 500
    max_depth: int = 3
    shrinkage: float = 0.05
    row_subsample: float = 0.5
    col_subsample: float = 1.0
    min_leaf: int = 10
    seed: int = 0

    def validate(self):
        if self.n_trees < 1:
            raise DataError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise DataError("max_depth must be >= 1")
        if not 0.0 < self.shrinkage <= 1.0:
            raise DataError("shrinkage must lie in (0, 1]")
        for name in ("row_subsample", "col_subsample"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise DataError(f"{name} must lie in (0, 1]")
        if self.min_leaf < 1:
            raise DataError("min_leaf must be >= 1")
        return self


@dataclass
class TreeNode:
    """Internal node (feature + threshold or left category set) or leaf (value)."""

    feature: int | None = None
    threshold: float | None = None
    left_categories: frozenset[int] | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float | None = None
    n_samples: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.value is not None

    def goes_left(self, x: np.ndarray) -> np.ndarray:
        """Boolean row mask for the left child. NaN never goes left."""
        col = x[:, self.feature]
        if self.left_categories is not None:
            mask = np.zeros(len(col), dtype=bool)
            ok = ~np.isnan(col)
            mask[ok] = np.isin(col[ok].astype(int), list(self.left_categories))
            return mask
        return col <= self.threshold


@dataclass
class GbmModel:
    base_score: float
    trees: list[TreeNode]
    shrinkage: float
    features: list[FeatureSpec]
    loss_path: list[float] = field(default_factory=list)

    def margins(self, dataset: Dataset) -> np.ndarray:
        _check_schema_match(self.features, dataset.features)
        out = np.full(dataset.n, self.base_score)
        for root in self.trees:
            out += self.shrinkage * _tree_values(root, dataset.X)
        return out


def _check_schema_match(model_features, data_features):
    if list(model_features) != list(data_features):
        raise DataError("dataset schema does not match the model's feature schema")


def _tree_values(root: TreeNode, X: np.ndarray) -> np.ndarray:
    values = np.empty(X.shape[0])
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if node.is_leaf:
            values[rows] = node.value
            continue
        left = node.goes_left(X[rows])
        stack.append((node.left, rows[left]))
        stack.append((node.right, rows[~left]))
    return values


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_loss(y, margins):
    # log(1 + exp(-m)) for y=1, log(1 + exp(m)) for y=0, computed stably
    signed = np.where(y == 1, -margins, margins)
    return float(np.mean(np.logaddexp(0.0, signed)))


def _best_numeric_split(x, g, min_leaf):
    order = np.argsort(x, kind="stable")
    xs, gs = x[order], g[order]
    n = len(xs)
    prefix = np.cumsum(gs)
    total = prefix[-1]
    base = total * total / n
    # candidate boundaries between distinct values, honoring min_leaf
    cut = np.flatnonzero(xs[:-1] < xs[1:]) + 1
    cut = cut[(cut >= min_leaf) & (cut <= n - min_leaf)]
    if cut.size == 0:
        return None
    s_left = prefix[cut - 1]
    gains = s_left**2 / cut + (total - s_left) ** 2 / (n - cut) - base
    k = int(np.argmax(gains))
    if gains[k] <= MIN_GAIN:
        return None
    i = cut[k]
    return float(gains[k]), (xs[i - 1] + xs[i]) / 2.0


def _best_categorical_split(x, g, min_leaf):
    codes = x.astype(int)
    n_cats = codes.max() + 1
    counts = np.bincount(codes, minlength=n_cats)
    sums = np.bincount(codes, weights=g, minlength=n_cats)
    present = np.flatnonzero(counts)
    if present.size < 2:
        return None
    means = sums[present] / counts[present]
    order = present[np.argsort(means, kind="stable")]
    c_counts = np.cumsum(counts[order])
    c_sums = np.cumsum(sums[order])
    n, total = c_counts[-1], c_sums[-1]
    base = total * total / n
    k = np.arange(1, len(order))
    n_left = c_counts[:-1]
    ok = (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not ok.any():
        return None
    s_left = c_sums[:-1][ok]
    n_l = n_left[ok]
    gains = s_left**2 / n_l + (total - s_left) ** 2 / (n - n_l) - base
    j = int(np.argmax(gains))
    if gains[j] <= MIN_GAIN:
        return None
    split_at = k[ok][j]
    return float(gains[j]), frozenset(int(c) for c in order[:split_at])


def _grow_tree(X, specs, cols, g, h, rows, depth, max_depth, min_leaf):
    node = TreeNode(n_samples=len(rows))
    if depth < max_depth and len(rows) >= 2 * min_leaf:
        best = None
        for j in cols:
            x = X[rows, j]
            if specs[j].kind == CATEGORICAL:
                found = _best_categorical_split(x, g[rows], min_leaf)
                if found is not None:
                    gain, left_cats = found
                    cand = (gain, j, TreeNode(feature=int(j), left_categories=left_cats))
                else:
                    cand = None
            else:
                found = _best_numeric_split(x, g[rows], min_leaf)
                if found is not None:
                    gain, thr = found
                    cand = (gain, j, TreeNode(feature=int(j), threshold=float(thr)))
                else:
                    cand = None
            if cand is not None and (best is None or cand[0] > best[0]):
                best = cand
        if best is not None:
            _, j, split = best
            node.feature = split.feature
            node.threshold = split.threshold
            node.left_categories = split.left_categories
            node.n_samples = len(rows)
            left_mask = split.goes_left(X[rows])
            node.left = _grow_tree(
                X, specs, cols, g, h, rows[left_mask], depth + 1, max_depth, min_leaf
            )
            node.right = _grow_tree(
                X, specs, cols, g, h, rows[~left_mask], depth + 1, max_depth, min_leaf
            )
            return node
    node.value = float(g[rows].sum() / max(h[rows].sum(), HESSIAN_FLOOR))
    return node


def fit_gbm(train: Dataset, config: GbmConfig | None = None) -> GbmModel:
    """Stagewise boosting fit; deterministic given (data, config)."""
    config = (config or GbmConfig()).validate()
    check_both_classes(train.y, "fit_gbm")
    if train.has_missing():
        raise DataError("training data contains missing values; impute first")
    if train.n < 2 * config.min_leaf:
        raise DataError(
            f"min_leaf={config.min_leaf} unreachable at the root with {train.n} rows"
        )
    X, y = train.X, train.y.astype(np.float64)
    rng = np.random.default_rng(config.seed)

    p_bar = y.mean()
    base = float(np.log(p_bar / (1.0 - p_bar)))
    margins = np.full(train.n, base)
    n_rows = min(max(1, int(round(train.n * config.row_subsample))), train.n)
    n_cols = max(1, int(round(train.p * config.col_subsample)))

    trees = []
    loss_path = [_log_loss(y, margins)]
    for _ in range(config.n_trees):
        prob = _sigmoid(margins)
        g = y - prob  # negative gradient of the logistic loss
        h = prob * (1.0 - prob)
        rows = np.sort(rng.choice(train.n, size=n_rows, replace=False))
        cols = np.sort(rng.choice(train.p, size=n_cols, replace=False))
        root = _grow_tree(
            X, train.features, cols, g, h, rows, 0, config.max_depth, config.min_leaf
        )
        margins += config.shrinkage * _tree_values(root, X)
        trees.append(root)
        loss_path.append(_log_loss(y, margins))

    return GbmModel(base, trees, config.shrinkage, list(train.features), loss_path)


def predict_gbm(model: GbmModel, dataset: Dataset) -> np.ndarray:
    """Per-row event probabilities: sigmoid of the additive margin."""
    return _sigmoid(model.margins(dataset))


class GradientBoostedTrees(BaseEstimator):
    """Estimator wrapper around :func:`fit_gbm` / :func:`predict_gbm`."""

    def __init__(
        self,
        n_trees=500,
        max_depth=3,
        shrinkage=0.05,
        row_subsample=0.5,
        col_subsample=1.0,
        min_leaf=10,
        seed=0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.shrinkage = shrinkage
        self.row_subsample = row_subsample
        self.col_subsample = col_subsample
        self.min_leaf = min_leaf
        self.seed = seed

    def _config(self):
        return GbmConfig(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            shrinkage=self.shrinkage,
            row_subsample=self.row_subsample,
            col_subsample=self.col_subsample,
            min_leaf=self.min_leaf,
            seed=self.seed,
        )

    def fit(self, dataset: Dataset, y=None):
        self.model_ = fit_gbm(dataset, self._config())
        return self

    def predict_proba(self, dataset: Dataset) -> np.ndarray:
        p = predict_gbm(self.model_, dataset)
        return np.column_stack([1.0 - p, p])

    def predict(self, dataset: Dataset) -> np.ndarray:
        return (predict_gbm(self.model_, dataset) >= 0.5).astype(np.int8)
