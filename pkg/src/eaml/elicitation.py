"""Expert-assessment aggregation and expert/data disagreement rankings.

Rules are ranked twice: by the event rate of their subpopulation
(empirical) and by the mean expert rating (perceived), both ascending with
average ranks on ties. The per-rule delta is empirical rank minus perceived
rank, so rules the experts overestimated come out negative. Absolute deltas
are cut into equal-width bins, bin 0 holding full agreement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .rules import RuleMatrix
from .validation import DataError

logger = logging.getLogger(__name__)

RATING_LABELS = {
    1: "highly decrease",
    2: "moderately decrease",
    3: "no effect",
    4: "moderately increase",
    5: "highly increase",
}


@dataclass(frozen=True)
class ExpertAssessment:
    expert_id: str
    rule_id: str
    rating: int
    elapsed_ms: int
    timestamp: float

    def __post_init__(self):
        if self.rating not in (1, 2, 3, 4, 5):
            raise DataError(f"rating must be 1..5, got {self.rating}")
        if self.elapsed_ms < 0:
            raise DataError("elapsed_ms must be >= 0")


@dataclass(frozen=True)
class AssessmentSummary:
    rule_id: str
    n_raters: int
    mean_rating: float
    stdev: float  # population standard deviation over raters


@dataclass(frozen=True)
class DeltaRanking:
    rule_id: str
    empirical_risk: float
    rank_empirical: float
    rank_perceived: float
    delta: float  # rank_empirical - rank_perceived
    abs_bin: int


def aggregate(assessments, expected_rule_ids=None) -> list[AssessmentSummary]:
    """Per-rule mean rating and population stdev across raters.

    Duplicate (expert, rule) pairs are an error. Rules from
    ``expected_rule_ids`` with no assessments are omitted and logged.
    """
    by_rule: dict[str, list[int]] = {}
    seen = set()
    for a in assessments:
        key = (a.expert_id, a.rule_id)
        if key in seen:
            raise DataError(f"duplicate assessment for expert {a.expert_id!r} on rule {a.rule_id!r}")
        seen.add(key)
        by_rule.setdefault(a.rule_id, []).append(a.rating)
    if expected_rule_ids is not None:
        missing = [rid for rid in expected_rule_ids if rid not in by_rule]
        if missing:
            logger.warning("%d rules have no assessments and were omitted: %s",
                           len(missing), ", ".join(missing[:10]))
    out = []
    for rule_id in sorted(by_rule):
        ratings = np.array(by_rule[rule_id], dtype=np.float64)
        out.append(
            AssessmentSummary(
                rule_id=rule_id,
                n_raters=len(ratings),
                mean_rating=float(ratings.mean()),
                stdev=float(ratings.std()),
            )
        )
    return out


def empirical_risk(rule_id: str, matrix: RuleMatrix, y) -> float:
    """Event rate within the rule's subpopulation."""
    col = matrix.column(rule_id)
    n_matched = int(col.sum())
    if n_matched == 0:
        raise DataError(f"rule {rule_id!r} has zero support")
    return float(np.asarray(y)[col].sum() / n_matched)


def empirical_risks(matrix: RuleMatrix, y) -> dict[str, float]:
    return {rid: empirical_risk(rid, matrix, y) for rid in matrix.rule_ids}


def bin_abs_deltas(deltas: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bins of |delta| over [0, max|delta|]; bin 0 is most agreement."""
    if bins < 2:
        raise DataError("bins must be >= 2")
    a = np.abs(np.asarray(deltas, dtype=np.float64))
    top = a.max() if a.size else 0.0
    if top == 0.0:
        return np.zeros(len(a), dtype=int)
    return np.minimum((a / top * bins).astype(int), bins - 1)


def compute_delta_ranking(summaries, risks, bins: int = 5) -> list[DeltaRanking]:
    """Signed rank deltas between empirical and perceived risk orderings."""
    ids = [s.rule_id for s in summaries]
    if set(ids) != set(risks):
        raise DataError("summaries and risks cover different rule sets")
    risk = np.array([risks[i] for i in ids])
    perceived = np.array([s.mean_rating for s in summaries])
    rank_e = rankdata(risk, method="average")
    rank_p = rankdata(perceived, method="average")
    delta = rank_e - rank_p
    abs_bin = bin_abs_deltas(delta, bins)
    return [
        DeltaRanking(
            rule_id=ids[i],
            empirical_risk=float(risk[i]),
            rank_empirical=float(rank_e[i]),
            rank_perceived=float(rank_p[i]),
            delta=float(delta[i]),
            abs_bin=int(abs_bin[i]),
        )
        for i in range(len(ids))
    ]


def outlier_rules(deltas, ci: float = 0.90):
    """Rules whose delta falls outside the central ``ci`` mass of the deltas.

    Returns (low, high): below the (1-ci)/2 quantile and above the (1+ci)/2
    quantile, each sorted by |delta| descending.
    """
    if not 0.0 < ci < 1.0:
        raise DataError("ci must lie in (0, 1)")
    values = np.array([d.delta for d in deltas])
    lo = np.quantile(values, (1.0 - ci) / 2.0)
    hi = np.quantile(values, (1.0 + ci) / 2.0)
    low = sorted((d for d in deltas if d.delta < lo), key=lambda d: -abs(d.delta))
    high = sorted((d for d in deltas if d.delta > hi), key=lambda d: -abs(d.delta))
    return low, high


@dataclass(frozen=True)
class CalibrationBin:
    quintile: int  # 1 (lowest perceived risk) .. 5 (highest)
    n_rules: int
    mean_empirical_risk: float
    half_width: float  # 1.96 * standard error of the mean


def quintile_calibration(summaries, risks) -> list[CalibrationBin]:
    """Mean empirical risk by quintile of mean expert rating.

    Rules are sorted by perceived risk and cut into 5 nearly equal groups,
    any remainder going to the lowest quintiles.
    """
    if len(summaries) < 5:
        raise DataError("need at least 5 rules for quintiles")
    if set(s.rule_id for s in summaries) != set(risks):
        raise DataError("summaries and risks cover different rule sets")
    ordered = sorted(summaries, key=lambda s: (s.mean_rating, s.rule_id))
    k = len(ordered)
    base, rem = divmod(k, 5)
    sizes = [base + 1 if i < rem else base for i in range(5)]
    out = []
    start = 0
    for q, size in enumerate(sizes, start=1):
        group = ordered[start : start + size]
        start += size
        values = np.array([risks[s.rule_id] for s in group])
        se = float(values.std(ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
        out.append(
            CalibrationBin(
                quintile=q,
                n_rules=len(group),
                mean_empirical_risk=float(values.mean()),
                half_width=1.96 * se,
            )
        )
    return out
