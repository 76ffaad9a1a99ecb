"""Versioned structured-text persistence for models, rules, and assessments.

One JSON document format (with a ``format`` and ``version`` field) covers
the fitted pipeline model; rule exports and assessment stores are
line-delimited JSON so they can be appended and streamed. All writers sort
keys and use repr-exact floats, so identical inputs produce byte-identical
files.
"""

from __future__ import annotations

import json

import numpy as np

from .boosting import GbmModel, TreeNode
from .data import schema_from_records, schema_to_records
from .elicitation import AssessmentSummary, DeltaRanking, ExpertAssessment
from .linear import LinearRuleModel
from .rules import IN, Condition, Rule, RuleCard, card_from_payload
from .validation import DataError

MODEL_FORMAT = "eaml-model"
MODEL_VERSION = 1


def _dump(payload) -> str:
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


def tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value, "n": node.n_samples}
    out = {
        "feature": node.feature,
        "left": tree_to_dict(node.left),
        "right": tree_to_dict(node.right),
        "n": node.n_samples,
    }
    if node.left_categories is not None:
        out["left_categories"] = sorted(node.left_categories)
    else:
        out["threshold"] = node.threshold
    return out


def tree_from_dict(payload: dict) -> TreeNode:
    if "value" in payload:
        return TreeNode(value=payload["value"], n_samples=payload.get("n", 0))
    cats = payload.get("left_categories")
    return TreeNode(
        feature=payload["feature"],
        threshold=payload.get("threshold"),
        left_categories=frozenset(cats) if cats is not None else None,
        left=tree_from_dict(payload["left"]),
        right=tree_from_dict(payload["right"]),
        n_samples=payload.get("n", 0),
    )


def gbm_to_dict(model: GbmModel) -> dict:
    return {
        "base_score": model.base_score,
        "shrinkage": model.shrinkage,
        "schema": schema_to_records(model.features),
        "trees": [tree_to_dict(t) for t in model.trees],
    }


def gbm_from_dict(payload: dict) -> GbmModel:
    return GbmModel(
        base_score=payload["base_score"],
        trees=[tree_from_dict(t) for t in payload["trees"]],
        shrinkage=payload["shrinkage"],
        features=schema_from_records(payload["schema"]),
    )


def condition_to_dict(c: Condition) -> dict:
    if c.op == IN:
        return {"feature": c.feature, "op": c.op, "categories": sorted(c.categories)}
    return {"feature": c.feature, "op": c.op, "threshold": c.threshold}


def condition_from_dict(payload: dict) -> Condition:
    if payload["op"] == IN:
        return Condition(payload["feature"], IN, categories=frozenset(payload["categories"]))
    return Condition(payload["feature"], payload["op"], threshold=payload["threshold"])


def rule_to_dict(rule: Rule, support: float | None = None, card: RuleCard | None = None) -> dict:
    out = {
        "id": rule.id,
        "conditions": [condition_to_dict(c) for c in rule.conditions],
        "provenance": list(rule.provenance),
    }
    if rule.value is not None:
        out["value"] = rule.value
    if support is not None:
        out["support"] = support
    if card is not None:
        out["card"] = card.to_payload()
    return out


def rule_from_dict(payload: dict) -> Rule:
    return Rule(
        id=payload["id"],
        conditions=tuple(condition_from_dict(c) for c in payload["conditions"]),
        provenance=tuple(payload.get("provenance", (0, 0))),
        value=payload.get("value"),
    )


def save_rule_export(path, rules, supports=None, cards=None):
    """Line-delimited rule records with optional supports and card payloads."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, rule in enumerate(rules):
            record = rule_to_dict(
                rule,
                support=None if supports is None else float(supports[i]),
                card=None if cards is None else cards[i],
            )
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_rule_export(path):
    """Returns (rules, supports by id, cards by id)."""
    rules, supports, cards = [], {}, {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            payload = json.loads(line)
            rule = rule_from_dict(payload)
            rules.append(rule)
            if "support" in payload:
                supports[rule.id] = payload["support"]
            if "card" in payload:
                cards[rule.id] = card_from_payload(payload["card"])
    return rules, supports, cards


def linear_to_dict(model: LinearRuleModel) -> dict:
    if model.rule_ids is None:
        raise DataError("cannot serialize a linear model without rule ids")
    return {
        "intercept": model.intercept,
        "penalty": model.penalty,
        "lambda": model.lam,
        "coef": {rid: float(c) for rid, c in zip(model.rule_ids, model.coef)},
        "weights": {rid: _finite_or_str(w) for rid, w in zip(model.rule_ids, model.weights)},
        "rule_ids": list(model.rule_ids),
    }


def _finite_or_str(w: float):
    return float(w) if np.isfinite(w) else "inf"


def linear_from_dict(payload: dict) -> LinearRuleModel:
    rule_ids = list(payload["rule_ids"])
    coef = np.array([payload["coef"][rid] for rid in rule_ids])
    weights = np.array(
        [np.inf if payload["weights"][rid] == "inf" else payload["weights"][rid] for rid in rule_ids]
    )
    return LinearRuleModel(
        intercept=payload["intercept"],
        coef=coef,
        penalty=payload["penalty"],
        lam=payload["lambda"],
        weights=weights,
        rule_ids=rule_ids,
    )


def save_model_document(path, *, schema, linear, rules, gbm=None, imputation=None, metadata=None):
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "schema": schema_to_records(schema),
        "linear": linear_to_dict(linear),
        "rules": [rule_to_dict(r) for r in rules],
    }
    if gbm is not None:
        payload["gbm"] = gbm_to_dict(gbm)
    if imputation is not None:
        payload["imputation"] = imputation
    if metadata is not None:
        payload["metadata"] = metadata
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump(payload))


def load_model_document(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise DataError(f"{path}: not a {MODEL_FORMAT} document")
    if payload.get("version") != MODEL_VERSION:
        raise DataError(f"{path}: unsupported version {payload.get('version')}")
    out = {
        "schema": schema_from_records(payload["schema"]),
        "linear": linear_from_dict(payload["linear"]),
        "rules": [rule_from_dict(r) for r in payload["rules"]],
        "metadata": payload.get("metadata", {}),
        "imputation": payload.get("imputation"),
    }
    if "gbm" in payload:
        out["gbm"] = gbm_from_dict(payload["gbm"])
    return out


def assessment_to_dict(a: ExpertAssessment) -> dict:
    return {
        "expert_id": a.expert_id,
        "rule_id": a.rule_id,
        "rating": a.rating,
        "elapsed_ms": a.elapsed_ms,
        "timestamp": a.timestamp,
    }


def assessment_from_dict(payload: dict) -> ExpertAssessment:
    return ExpertAssessment(
        expert_id=payload["expert_id"],
        rule_id=payload["rule_id"],
        rating=int(payload["rating"]),
        elapsed_ms=int(payload["elapsed_ms"]),
        timestamp=float(payload["timestamp"]),
    )


def save_assessments(path, assessments):
    with open(path, "w", encoding="utf-8") as fh:
        for a in assessments:
            fh.write(json.dumps(assessment_to_dict(a), sort_keys=True) + "\n")


def load_assessments(path):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(assessment_from_dict(json.loads(line)))
    return out


def delta_report_to_dict(summaries, deltas, low_outliers, high_outliers) -> dict:
    s_by_id = {s.rule_id: s for s in summaries}
    return {
        "format": "eaml-delta-report",
        "version": 1,
        "rules": [
            {
                "rule_id": d.rule_id,
                "empirical_risk": d.empirical_risk,
                "mean_rating": s_by_id[d.rule_id].mean_rating,
                "stdev": s_by_id[d.rule_id].stdev,
                "n_raters": s_by_id[d.rule_id].n_raters,
                "rank_empirical": d.rank_empirical,
                "rank_perceived": d.rank_perceived,
                "delta": d.delta,
                "abs_bin": d.abs_bin,
            }
            for d in deltas
        ],
        "outliers": {
            "low": [d.rule_id for d in low_outliers],
            "high": [d.rule_id for d in high_outliers],
        },
    }


def save_delta_report(path, summaries, deltas, low_outliers, high_outliers):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump(delta_report_to_dict(summaries, deltas, low_outliers, high_outliers)))


def load_delta_report(path):
    """Returns (summaries, deltas, outlier ids dict)."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "eaml-delta-report":
        raise DataError(f"{path}: not a delta report")
    summaries, deltas = [], []
    for rec in payload["rules"]:
        summaries.append(
            AssessmentSummary(
                rule_id=rec["rule_id"],
                n_raters=rec["n_raters"],
                mean_rating=rec["mean_rating"],
                stdev=rec["stdev"],
            )
        )
        deltas.append(
            DeltaRanking(
                rule_id=rec["rule_id"],
                empirical_risk=rec["empirical_risk"],
                rank_empirical=rec["rank_empirical"],
                rank_perceived=rec["rank_perceived"],
                delta=rec["delta"],
                abs_bin=rec["abs_bin"],
            )
        )
    return summaries, deltas, payload["outliers"]
