"""End-to-end rule-ensemble fit: impute, boost, extract rules, select by
validation AUC along an L1 path. This is the chain behind the ``rulefit-fit``
command; the estimator wrapper composes with sklearn tooling."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .boosting import GbmConfig, fit_gbm
from .data import Dataset, MeanImputer, stratified_split
from .evaluation import auc, balanced_accuracy
from .linear import L1, fit_penalized_logistic, lambda_path, predict_linear
from .rules import build_rule_matrix, extract_rules, filter_by_support, render_rule_card
from .validation import DataError


@dataclass
class PipelineConfig:
    gbm: GbmConfig = field(default_factory=GbmConfig)
    min_support: float = 0.01
    max_support: float = 0.99
    train_fraction: float = 0.7
    selection_fraction: float = 0.8  # of the training part, rest selects lambda
    n_lambdas: int = 20
    lambda_min_ratio: float = 0.02
    tol: float = 1e-6
    include_partial_paths: bool = False

    def to_json(self) -> str:
        payload = asdict(self)
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        payload = json.loads(text)
        gbm = GbmConfig(**payload.pop("gbm", {}))
        return cls(gbm=gbm, **payload)


@dataclass
class PipelineResult:
    imputer: MeanImputer
    gbm_model: object
    rules: list
    linear: object
    selected_lam: float
    train: Dataset
    test: Dataset
    train_auc: float
    test_auc: float
    train_balanced_accuracy: float
    test_balanced_accuracy: float
    cards: list


def run_rulefit(dataset: Dataset, config: PipelineConfig, seed: int) -> PipelineResult:
    """Impute, split, boost, extract and filter rules, pick lambda on a held-out
    slice of the training part, then refit on the full training part."""
    imputer = MeanImputer().fit(dataset)
    filled = imputer.transform(dataset)
    train, test = stratified_split(filled, config.train_fraction, seed)

    gbm_config = GbmConfig(**{**asdict(config.gbm), "seed": config.gbm.seed + seed})
    gbm_model = fit_gbm(train, gbm_config)
    rules = extract_rules(gbm_model, include_partial_paths=config.include_partial_paths)
    rules = filter_by_support(rules, train, config.min_support, config.max_support)
    if not rules:
        raise DataError("no rules survive the support filter")

    fit_part, select_part = stratified_split(train, config.selection_fraction, seed + 1)
    fit_matrix = build_rule_matrix(rules, fit_part)
    select_matrix = build_rule_matrix(rules, select_part)
    best = None
    for lam, model in lambda_path(
        fit_matrix,
        fit_part.y,
        penalty=L1,
        n_lambdas=config.n_lambdas,
        lambda_min_ratio=config.lambda_min_ratio,
        tol=config.tol,
    ):
        score = auc(predict_linear(model, select_matrix), select_part.y)
        if best is None or score > best[0]:
            best = (score, lam)
    selected_lam = best[1]

    train_matrix = build_rule_matrix(rules, train)
    linear = fit_penalized_logistic(
        train_matrix, train.y, selected_lam, penalty=L1, tol=config.tol
    )
    # dropping zero-coefficient rules leaves predictions unchanged
    keep = [i for i, c in enumerate(linear.coef) if c != 0.0]
    if keep:
        rules = [rules[i] for i in keep]
        train_matrix = train_matrix.subset([r.id for r in rules])
        linear.coef = linear.coef[keep]
        linear.weights = linear.weights[keep]
        linear.rule_ids = [r.id for r in rules]

    test_matrix = build_rule_matrix(rules, test)
    train_scores = predict_linear(linear, train_matrix)
    test_scores = predict_linear(linear, test_matrix)
    cards = [render_rule_card(r, train) for r in rules]
    return PipelineResult(
        imputer=imputer,
        gbm_model=gbm_model,
        rules=rules,
        linear=linear,
        selected_lam=selected_lam,
        train=train,
        test=test,
        train_auc=auc(train_scores, train.y),
        test_auc=auc(test_scores, test.y),
        train_balanced_accuracy=balanced_accuracy(train_scores, train.y),
        test_balanced_accuracy=balanced_accuracy(test_scores, test.y),
        cards=cards,
    )


class RuleEnsembleClassifier(BaseEstimator):
    """Boosted-rule generation plus L1 selection as one sklearn-style estimator."""

    def __init__(self, n_trees=500, max_depth=3, shrinkage=0.05, row_subsample=0.5,
                 col_subsample=1.0, min_leaf=10, min_support=0.01, max_support=0.99,
                 n_lambdas=20, lambda_min_ratio=0.02, tol=1e-6, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.shrinkage = shrinkage
        self.row_subsample = row_subsample
        self.col_subsample = col_subsample
        self.min_leaf = min_leaf
        self.min_support = min_support
        self.max_support = max_support
        self.n_lambdas = n_lambdas
        self.lambda_min_ratio = lambda_min_ratio
        self.tol = tol
        self.seed = seed

    def _config(self):
        return PipelineConfig(
            gbm=GbmConfig(
                n_trees=self.n_trees, max_depth=self.max_depth, shrinkage=self.shrinkage,
                row_subsample=self.row_subsample, col_subsample=self.col_subsample,
                min_leaf=self.min_leaf, seed=0,
            ),
            min_support=self.min_support, max_support=self.max_support,
            n_lambdas=self.n_lambdas, lambda_min_ratio=self.lambda_min_ratio,
            tol=self.tol,
        )

    def fit(self, dataset: Dataset, y=None):
        self.result_ = run_rulefit(dataset, self._config(), self.seed)
        self.rules_ = self.result_.rules
        self.linear_ = self.result_.linear
        return self

    def predict_proba(self, dataset: Dataset):
        filled = self.result_.imputer.transform(dataset)
        matrix = build_rule_matrix(self.rules_, filled)
        p = predict_linear(self.linear_, matrix)
        return np.column_stack([1.0 - p, p])

    def predict(self, dataset: Dataset):
        return (self.predict_proba(dataset)[:, 1] >= 0.5).astype(np.int8)
