"""Conjunctive rules extracted from boosted trees.

A rule is the AND of the conditions along one root-to-leaf path. Conditions
on the same feature are merged (tightest numeric bounds, intersected
category sets) and exact duplicates across trees are dropped. The rule
matrix is the Boolean case-by-rule indicator used as the design matrix for
penalized selection, and rule cards are the reviewer-facing rendering:
per feature, a subpopulation line and a whole-population line of
"median (range)" or "mode (levels)" statistics.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .boosting import GbmModel, TreeNode
from .data import CATEGORICAL, Dataset
from .validation import DataError

LE = "<="
GT = ">"
IN = "in"


@dataclass(frozen=True)
class Condition:
    feature: str
    op: str
    threshold: float | None = None
    categories: frozenset[str] | None = None

    def __post_init__(self):
        if self.op in (LE, GT):
            if self.threshold is None or not np.isfinite(self.threshold):
                raise DataError(f"condition on {self.feature!r} needs a finite threshold")
        elif self.op == IN:
            if not self.categories:
                raise DataError(f"condition on {self.feature!r} needs a nonempty category set")
        else:
            raise DataError(f"unknown operator {self.op!r}")

    def describe(self) -> str:
        if self.op == IN:
            return f"{self.feature} in {{{', '.join(sorted(self.categories))}}}"
        return f"{self.feature} {self.op} {self.threshold:g}"


@dataclass(frozen=True)
class Rule:
    id: str
    conditions: tuple[Condition, ...]
    provenance: tuple[int, int]  # (tree index, leaf index)
    value: float | None = None  # leaf log-odds increment, kept for equivalence checks

    def describe(self) -> str:
        return " & ".join(c.describe() for c in self.conditions)


def _canonical_payload(conditions):
    payload = []
    for c in sorted(conditions, key=lambda c: (c.feature, c.op, c.threshold or 0.0)):
        if c.op == IN:
            payload.append([c.feature, c.op, sorted(c.categories)])
        else:
            payload.append([c.feature, c.op, repr(c.threshold)])
    return payload


def rule_id_for(conditions) -> str:
    """Stable content hash of the simplified condition set."""
    blob = json.dumps(_canonical_payload(conditions), separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def simplify(conditions, features) -> tuple[Condition, ...]:
    """Merge per-feature conditions: tightest bounds, intersected category sets."""
    lower: dict[str, float] = {}
    upper: dict[str, float] = {}
    cats: dict[str, frozenset[str]] = {}
    for c in conditions:
        if c.op == LE:
            upper[c.feature] = min(upper.get(c.feature, np.inf), c.threshold)
        elif c.op == GT:
            lower[c.feature] = max(lower.get(c.feature, -np.inf), c.threshold)
        else:
            prev = cats.get(c.feature)
            cats[c.feature] = c.categories if prev is None else prev & c.categories
    order = {f.name: j for j, f in enumerate(features)}
    out = []
    for name in sorted(set(lower) | set(upper) | set(cats), key=order.__getitem__):
        if name in cats:
            if not cats[name]:
                raise DataError(f"contradictory category conditions on {name!r}")
            out.append(Condition(name, IN, categories=cats[name]))
            continue
        lo, hi = lower.get(name), upper.get(name)
        if lo is not None and hi is not None and not lo < hi:
            raise DataError(f"contradictory bounds on {name!r}: > {lo} and <= {hi}")
        if lo is not None:
            out.append(Condition(name, GT, threshold=lo))
        if hi is not None:
            out.append(Condition(name, LE, threshold=hi))
    return tuple(out)


def _node_condition(node: TreeNode, features, left: bool) -> Condition:
    spec = features[node.feature]
    if node.left_categories is not None:
        included = frozenset(
            spec.categories[i]
            for i in (node.left_categories if left else set(range(len(spec.categories))) - node.left_categories)
        )
        return Condition(spec.name, IN, categories=included)
    return Condition(spec.name, LE if left else GT, threshold=node.threshold)


def extract_leaf_rules(model: GbmModel) -> list[Rule]:
    """One rule per leaf with its value, before simplification or dedup.

    Root-only trees yield a rule with no conditions (matches every row);
    these are kept so that rule-sum margins reproduce tree traversal exactly.
    """
    rules = []
    for t, root in enumerate(model.trees):
        leaf_idx = 0
        stack = [(root, [])]
        while stack:
            node, path = stack.pop()
            if node.is_leaf:
                conditions = tuple(path)
                rules.append(
                    Rule(
                        id=rule_id_for(conditions),
                        conditions=conditions,
                        provenance=(t, leaf_idx),
                        value=node.value,
                    )
                )
                leaf_idx += 1
                continue
            # right pushed first so the left branch is visited first
            right_cond = _node_condition(node, model.features, left=False)
            left_cond = _node_condition(node, model.features, left=True)
            stack.append((node.right, path + [right_cond]))
            stack.append((node.left, path + [left_cond]))
    return rules


def extract_rules(model: GbmModel, include_partial_paths: bool = False) -> list[Rule]:
    """Simplified, deduplicated rules from every root-to-leaf path.

    With ``include_partial_paths`` every internal node contributes its
    root-to-node prefix as well. Exact duplicates (identical simplified
    condition sets) keep the first occurrence.
    """
    if not model.trees:
        raise DataError("model has no trees")
    raw: list[tuple[tuple[Condition, ...], tuple[int, int]]] = []
    for t, root in enumerate(model.trees):
        counter = 0
        stack = [(root, [])]
        while stack:
            node, path = stack.pop()
            if node.is_leaf or include_partial_paths:
                if path:
                    raw.append((tuple(path), (t, counter)))
                counter += 1
            if not node.is_leaf:
                right_cond = _node_condition(node, model.features, left=False)
                left_cond = _node_condition(node, model.features, left=True)
                stack.append((node.right, path + [right_cond]))
                stack.append((node.left, path + [left_cond]))
    out, seen = [], set()
    for conditions, prov in raw:
        simplified = simplify(conditions, model.features)
        rid = rule_id_for(simplified)
        if rid in seen:
            continue
        seen.add(rid)
        out.append(Rule(id=rid, conditions=simplified, provenance=prov))
    return out


def _condition_mask(cond: Condition, dataset: Dataset) -> np.ndarray:
    j = dataset.feature_index(cond.feature)
    spec = dataset.features[j]
    col = dataset.X[:, j]
    if cond.op == IN:
        if spec.kind != CATEGORICAL:
            raise DataError(f"category condition on numeric feature {cond.feature!r}")
        unknown = cond.categories - set(spec.categories)
        if unknown:
            raise DataError(f"unseen categories {sorted(unknown)} for feature {cond.feature!r}")
        codes = [i for i, label in enumerate(spec.categories) if label in cond.categories]
        mask = np.zeros(dataset.n, dtype=bool)
        ok = ~np.isnan(col)
        mask[ok] = np.isin(col[ok].astype(int), codes)
        return mask
    if spec.kind == CATEGORICAL:
        raise DataError(f"threshold condition on categorical feature {cond.feature!r}")
    with np.errstate(invalid="ignore"):
        return col <= cond.threshold if cond.op == LE else col > cond.threshold


def rule_mask(rule: Rule, dataset: Dataset) -> np.ndarray:
    """Boolean row mask of the rule's subpopulation. Missing values never match."""
    mask = np.ones(dataset.n, dtype=bool)
    for cond in rule.conditions:
        mask &= _condition_mask(cond, dataset)
    return mask


def evaluate_rule(rule: Rule, dataset: Dataset, row: int) -> bool:
    return bool(rule_mask(rule, dataset.take([row]))[0])


@dataclass
class RuleMatrix:
    rule_ids: list[str]
    matrix: np.ndarray  # bool, n cases x k rules
    supports: np.ndarray = field(init=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=bool)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.rule_ids):
            raise DataError("rule matrix shape does not match rule id count")
        n = self.matrix.shape[0]
        self.supports = self.matrix.mean(axis=0) if n else np.zeros(len(self.rule_ids))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    def column(self, rule_id: str) -> np.ndarray:
        return self.matrix[:, self.rule_ids.index(rule_id)]

    def subset(self, rule_ids) -> "RuleMatrix":
        index = {rid: i for i, rid in enumerate(self.rule_ids)}
        try:
            cols = [index[rid] for rid in rule_ids]
        except KeyError as exc:
            raise DataError(f"rule id {exc.args[0]!r} not present in matrix") from None
        return RuleMatrix(list(rule_ids), self.matrix[:, cols])


def build_rule_matrix(rules, dataset: Dataset) -> RuleMatrix:
    if not rules:
        return RuleMatrix([], np.zeros((dataset.n, 0), dtype=bool))
    cols = np.column_stack([rule_mask(r, dataset) for r in rules])
    return RuleMatrix([r.id for r in rules], cols)


def filter_by_support(rules, dataset: Dataset, min_support=0.01, max_support=0.99):
    """Drop rules defining trivial subpopulations (too rare or near-universal)."""
    matrix = build_rule_matrix(rules, dataset)
    keep = (matrix.supports >= min_support) & (matrix.supports <= max_support)
    return [r for r, k in zip(rules, keep) if k]


@dataclass(frozen=True)
class CardRow:
    feature: str
    subpopulation: str
    population: str


@dataclass(frozen=True)
class RuleCard:
    rule_id: str
    rows: tuple[CardRow, ...]

    def to_payload(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "features": [
                {"name": r.feature, "subpopulation": r.subpopulation, "population": r.population}
                for r in self.rows
            ],
        }


def card_from_payload(payload: dict) -> RuleCard:
    return RuleCard(
        rule_id=payload["rule_id"],
        rows=tuple(
            CardRow(f["name"], f["subpopulation"], f["population"])
            for f in payload["features"]
        ),
    )


def _numeric_line(values: np.ndarray) -> str:
    med, lo, hi = np.median(values), values.min(), values.max()
    return f"{med:.2f} ({lo:.2f} – {hi:.2f})"


def _categorical_line(codes: np.ndarray, spec, levels) -> str:
    counts = np.bincount(codes.astype(int), minlength=len(spec.categories))
    mode = spec.categories[int(np.argmax(counts))]
    shown = [c for c in spec.categories if c in levels]
    return f"{mode} ({', '.join(shown)})"


def render_rule_card(rule: Rule, dataset: Dataset) -> RuleCard:
    """Subpopulation vs whole-population statistics for each feature in the rule."""
    mask = rule_mask(rule, dataset)
    if not mask.any():
        raise DataError(f"rule {rule.id} matches no rows; cannot render a card")
    rows = []
    seen = set()
    for cond in rule.conditions:
        if cond.feature in seen:
            continue
        seen.add(cond.feature)
        j = dataset.feature_index(cond.feature)
        spec = dataset.features[j]
        col = dataset.X[:, j]
        sub, full = col[mask], col
        sub, full = sub[~np.isnan(sub)], full[~np.isnan(full)]
        if spec.kind == CATEGORICAL:
            included = cond.categories if cond.op == IN else frozenset(spec.categories)
            observed = {spec.categories[int(c)] for c in full}
            rows.append(
                CardRow(
                    feature=spec.name,
                    subpopulation=_categorical_line(sub, spec, included),
                    population=_categorical_line(full, spec, observed),
                )
            )
        else:
            rows.append(
                CardRow(
                    feature=spec.name,
                    subpopulation=_numeric_line(sub),
                    population=_numeric_line(full),
                )
            )
    return RuleCard(rule_id=rule.id, rows=tuple(rows))


def prediction_via_rules(model: GbmModel, leaf_rules, dataset: Dataset) -> np.ndarray:
    """Margins recomputed as base + shrinkage * sum of firing leaf values.

    ``leaf_rules`` must be :func:`extract_leaf_rules` output (pre-dedup,
    values retained); the result equals tree traversal exactly because each
    tree's leaves partition every row.
    """
    margins = np.full(dataset.n, model.base_score)
    for rule in leaf_rules:
        if rule.value is None:
            raise DataError(f"leaf rule {rule.id} lost its value")
        if rule.conditions:
            mask = rule_mask(rule, dataset)
            margins[mask] += model.shrinkage * rule.value
        else:
            margins += model.shrinkage * rule.value
    return margins


class RuleBinarizer(BaseEstimator, TransformerMixin):
    """Transformer turning a dataset into the Boolean matrix of a fixed rule set."""

    def __init__(self, rules=()):
        self.rules = list(rules)

    def fit(self, dataset: Dataset, y=None):
        return self

    def transform(self, dataset: Dataset) -> np.ndarray:
        return build_rule_matrix(self.rules, dataset).matrix
