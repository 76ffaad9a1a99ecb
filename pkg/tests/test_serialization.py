import numpy as np

from eaml.boosting import GbmConfig, fit_gbm
from eaml.elicitation import (
    aggregate,
    compute_delta_ranking,
    empirical_risks,
    outlier_rules,
)
from eaml.linear import fit_penalized_logistic
from eaml.rules import build_rule_matrix, extract_rules, render_rule_card
from eaml.serialization import (
    gbm_from_dict,
    gbm_to_dict,
    linear_from_dict,
    linear_to_dict,
    load_assessments,
    load_delta_report,
    load_model_document,
    load_rule_export,
    save_assessments,
    save_delta_report,
    save_model_document,
    save_rule_export,
)
from eaml.synthetic import SimulatedExpertSpec, SyntheticSpec, generate, simulate_experts

from conftest import random_dataset


def small_fit(seed=0):
    d = random_dataset(300, 4, seed=seed)
    gbm = fit_gbm(d, GbmConfig(n_trees=8, max_depth=2, row_subsample=0.8,
                               min_leaf=10, seed=seed))
    rules = extract_rules(gbm)
    matrix = build_rule_matrix(rules, d)
    linear = fit_penalized_logistic(matrix, d.y, 0.01)
    return d, gbm, rules, matrix, linear


def test_gbm_roundtrip_preserves_margins():
    d, gbm, *_ = small_fit()
    back = gbm_from_dict(gbm_to_dict(gbm))
    assert np.array_equal(back.margins(d), gbm.margins(d))


def test_linear_roundtrip():
    _, _, _, matrix, linear = small_fit(seed=1)
    back = linear_from_dict(linear_to_dict(linear))
    assert back.intercept == linear.intercept
    assert np.array_equal(back.coef, linear.coef)
    assert back.rule_ids == linear.rule_ids
    assert back.lam == linear.lam


def test_rule_export_roundtrip(tmp_path):
    d, _, rules, matrix, _ = small_fit(seed=2)
    cards = [render_rule_card(r, d) for r in rules]
    path = tmp_path / "rules.jsonl"
    save_rule_export(path, rules, supports=matrix.supports, cards=cards)
    back, supports, loaded_cards = load_rule_export(path)
    assert [r.id for r in back] == [r.id for r in rules]
    assert [r.conditions for r in back] == [r.conditions for r in rules]
    assert supports[rules[0].id] == matrix.supports[0]
    assert loaded_cards[rules[0].id] == cards[0]


def test_model_document_roundtrip(tmp_path):
    d, gbm, rules, matrix, linear = small_fit(seed=3)
    path = tmp_path / "model.json"
    save_model_document(path, schema=d.features, linear=linear, rules=rules,
                        gbm=gbm, metadata={"seed": 3})
    doc = load_model_document(path)
    assert doc["schema"] == d.features
    assert np.array_equal(doc["linear"].coef, linear.coef)
    assert [r.id for r in doc["rules"]] == [r.id for r in rules]
    assert doc["metadata"] == {"seed": 3}
    assert np.array_equal(doc["gbm"].margins(d), gbm.margins(d))


def test_model_document_byte_identical(tmp_path):
    d, gbm, rules, matrix, linear = small_fit(seed=4)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        save_model_document(path, schema=d.features, linear=linear, rules=rules, gbm=gbm)
    assert a.read_bytes() == b.read_bytes()


def _matching_bundle():
    # bundle whose train schema matches the conftest random_dataset schema
    spec = SyntheticSpec(n=500, beta=(1.0, -0.7, 0.5, 0.2), intercept=-0.5, seed=9)
    return generate(spec)


def test_assessments_roundtrip(tmp_path):
    _, _, rules, _, _ = small_fit(seed=5)
    assessments = simulate_experts(rules, _matching_bundle(),
                                   SimulatedExpertSpec(n_experts=2, seed=1))
    path = tmp_path / "assessments.jsonl"
    save_assessments(path, assessments)
    back = load_assessments(path)
    assert back == assessments


def test_delta_report_roundtrip(tmp_path):
    d, _, rules, matrix, _ = small_fit(seed=6)
    assessments = simulate_experts(rules, _matching_bundle(),
                                   SimulatedExpertSpec(n_experts=5, noise_sd=0.01, seed=2))
    summaries = aggregate(assessments)
    risks = empirical_risks(matrix, d.y)
    deltas = compute_delta_ranking(summaries, risks, bins=5)
    low, high = outlier_rules(deltas)
    path = tmp_path / "deltas.json"
    save_delta_report(path, summaries, deltas, low, high)
    s_back, d_back, outliers = load_delta_report(path)
    assert s_back == summaries
    assert d_back == deltas
    assert outliers["low"] == [x.rule_id for x in low]
