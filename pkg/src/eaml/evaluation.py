"""Metrics and experiment harnesses: AUC, balanced accuracy, rank-sum
comparison, learning curves over stratified subsamples, and multi-set
(shift) evaluation. Metrics are reported as fractions in [0, 1]; scale to
percent only in display code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, subsample_stratified
from .linear import L1, LinearRuleModel, fit_penalized_logistic, predict_linear
from .rules import build_rule_matrix
from .validation import DataError, check_both_classes

EXACT_WILCOXON_MAX_N = 16


def auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative, ties half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    check_both_classes(labels, "auc")
    ranks = rankdata(scores, method="average")
    n_pos = int((labels == 1).sum())
    n_neg = len(labels) - n_pos
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def balanced_accuracy(scores, labels, threshold: float = 0.5) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    check_both_classes(labels, "balanced_accuracy")
    predicted = scores >= threshold
    pos, neg = labels == 1, labels == 0
    sensitivity = float(predicted[pos].mean())
    specificity = float((~predicted[neg]).mean())
    return (sensitivity + specificity) / 2.0


def _rank_sum_statistic(a, b):
    """U statistic of sample a with average-tie ranks."""
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled, method="average")
    n_a = len(a)
    return float(ranks[:n_a].sum() - n_a * (n_a + 1) / 2.0)


def _exact_two_sided_p(u: float, n_a: int, n_b: int) -> float:
    """Enumerate every rank assignment of the pooled no-tie sample."""
    n = n_a + n_b
    offset = n_a * (n_a + 1) / 2.0
    values = [sum(c) - offset for c in combinations(range(1, n + 1), n_a)]
    total = len(values)
    le = sum(1 for v in values if v <= u)
    ge = sum(1 for v in values if v >= u)
    return min(1.0, 2.0 * min(le, ge) / total)


def _normal_two_sided_p(u: float, a, b) -> float:
    n_a, n_b = len(a), len(b)
    n = n_a + n_b
    pooled = np.concatenate([a, b])
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(((counts**3 - counts).sum()) / (n * (n - 1))) if n > 1 else 0.0
    mean = n_a * n_b / 2.0
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return 1.0
    # continuity correction toward the mean
    z = (u - mean - 0.5 * np.sign(u - mean)) / math.sqrt(var)
    return float(min(1.0, 2.0 * 0.5 * math.erfc(abs(z) / math.sqrt(2.0))))


def wilcoxon_rank_sum(a, b):
    """Two-sample rank-sum test: (U statistic of ``a``, two-sided p).

    Exact enumeration when the pooled size is at most 16 with no ties,
    otherwise a tie-corrected normal approximation with continuity
    correction.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise DataError("both samples must be nonempty")
    u = _rank_sum_statistic(a, b)
    pooled = np.concatenate([a, b])
    no_ties = len(np.unique(pooled)) == len(pooled)
    if len(pooled) <= EXACT_WILCOXON_MAX_N and no_ties:
        return u, _exact_two_sided_p(u, len(a), len(b))
    return u, _normal_two_sided_p(u, a, b)


@dataclass(frozen=True)
class EvalReport:
    dataset: str
    model: str
    auc: float
    balanced_accuracy: float
    n: int


@dataclass
class LearningCurve:
    rule_subset: str
    eval_set: str
    sizes: list[int]
    aucs: np.ndarray  # len(sizes) x n_subsamples

    @property
    def means(self) -> np.ndarray:
        return self.aucs.mean(axis=1)

    @property
    def stds(self) -> np.ndarray:
        return self.aucs.std(axis=1)


def learning_curve(
    pool: Dataset,
    rules,
    rule_subsets: dict[str, list[str]],
    eval_sets: dict[str, Dataset],
    sizes,
    n_subsamples: int,
    lam: float,
    seed: int,
    tol: float = 1e-6,
) -> dict[tuple[str, str], LearningCurve]:
    """AUC of L1 fits on stratified subsamples of increasing size.

    For every (rule subset, size, subsample) an L1 model is fitted at
    ``lam`` on the subsample's rule matrix and scored on each eval set.
    Results are deterministic for a given seed.
    """
    sizes = list(sizes)
    if any(s > pool.n for s in sizes):
        raise DataError("subsample size exceeds pool size")
    if sorted(sizes) != sizes or len(set(sizes)) != len(sizes):
        raise DataError("sizes must be strictly increasing")
    if n_subsamples < 2:
        raise DataError("need at least 2 subsamples")
    rng = np.random.default_rng(seed)
    sub_seeds = rng.integers(0, 2**31 - 1, size=(len(sizes), n_subsamples))
    rules = list(rules)
    eval_matrices = {name: build_rule_matrix(rules, ds) for name, ds in eval_sets.items()}

    curves = {
        (subset, name): LearningCurve(subset, name, sizes, np.zeros((len(sizes), n_subsamples)))
        for subset in rule_subsets
        for name in eval_sets
    }
    for i, size in enumerate(sizes):
        for s in range(n_subsamples):
            sample = subsample_stratified(pool, size, int(sub_seeds[i, s]))
            sample_matrix = build_rule_matrix(rules, sample)
            for subset_name, ids in rule_subsets.items():
                model = fit_penalized_logistic(
                    sample_matrix.subset(ids), sample.y, lam, penalty=L1, tol=tol
                )
                for eval_name, full in eval_matrices.items():
                    scores = predict_linear(model, full.subset(ids))
                    curves[(subset_name, eval_name)].aucs[i, s] = auc(
                        scores, eval_sets[eval_name].y
                    )
    return curves


def shift_eval(
    model: LinearRuleModel,
    rules,
    eval_sets: dict[str, Dataset],
    model_tag: str = "model",
    threshold: float = 0.5,
) -> list[EvalReport]:
    """Score one fitted rule model on several datasets (same schema family)."""
    if model.rule_ids is None:
        raise DataError("model does not record its rule ids")
    rule_by_id = {r.id: r for r in rules}
    missing = [rid for rid in model.rule_ids if rid not in rule_by_id]
    if missing:
        raise DataError(f"rules missing for model columns: {missing[:3]}")
    used = [rule_by_id[rid] for rid in model.rule_ids]
    reports = []
    for name, ds in eval_sets.items():
        matrix = build_rule_matrix(used, ds)
        scores = predict_linear(model, matrix)
        reports.append(
            EvalReport(
                dataset=name,
                model=model_tag,
                auc=auc(scores, ds.y),
                balanced_accuracy=balanced_accuracy(scores, ds.y, threshold),
                n=ds.n,
            )
        )
    return reports
