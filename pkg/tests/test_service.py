import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from eaml.boosting import GbmConfig, fit_gbm
from eaml.elicitation import aggregate
from eaml.rules import build_rule_matrix, extract_rules, filter_by_support, render_rule_card
from eaml.serialization import assessment_from_dict, save_rule_export
from eaml.service import build_app
from eaml.validation import DataError

from conftest import random_dataset


@pytest.fixture
def rules_file(tmp_path):
    d = random_dataset(400, 4, seed=50)
    gbm = fit_gbm(d, GbmConfig(n_trees=6, max_depth=2, row_subsample=0.9,
                               min_leaf=10, seed=51))
    rules = filter_by_support(extract_rules(gbm), d, 0.02, 0.98)
    matrix = build_rule_matrix(rules, d)
    cards = [render_rule_card(r, d) for r in rules]
    path = tmp_path / "rules.jsonl"
    save_rule_export(path, rules, supports=matrix.supports, cards=cards)
    return path, rules


def make_client(rules_file, tmp_path, name="store", seed=1):
    path, rules = rules_file
    app = build_app(path, tmp_path / name, permutation_seed=seed)
    return TestClient(app), rules


def run_expert(client, expert_id, rate=lambda card: 3, seed=None):
    body = {"expert_id": expert_id}
    if seed is not None:
        body["seed"] = seed
    session = client.post("/sessions", json=body).json()
    while True:
        nxt = client.get(f"/sessions/{session['session_id']}/next").json()
        if nxt["done"]:
            return session
        card = nxt["card"]
        resp = client.post(
            f"/sessions/{session['session_id']}/assessments",
            json={"rule_id": card["rule_id"], "rating": rate(card), "elapsed_ms": 1200},
        )
        assert resp.status_code == 200


def test_health_and_full_session(rules_file, tmp_path):
    client, rules = make_client(rules_file, tmp_path)
    assert client.get("/health").json()["status"] == "ok"
    session = client.post("/sessions", json={"expert_id": "e1", "seed": 3}).json()
    assert session["cursor"] == 0 and session["total"] == len(rules)
    run_expert(client, "e1", seed=3)
    export = client.get("/export").json()
    assert len(export) == len(rules)
    assert {r["rule_id"] for r in export} == {r.id for r in rules}


def test_sessions_are_permutations_and_seeds_differ(rules_file, tmp_path):
    client, rules = make_client(rules_file, tmp_path)
    orders = []
    for expert, seed in (("a", 10), ("b", 20)):
        session = client.post("/sessions", json={"expert_id": expert, "seed": seed}).json()
        seen = []
        while True:
            nxt = client.get(f"/sessions/{session['session_id']}/next").json()
            if nxt["done"]:
                break
            seen.append(nxt["card"]["rule_id"])
            client.post(f"/sessions/{session['session_id']}/assessments",
                        json={"rule_id": seen[-1], "rating": 3, "elapsed_ms": 5})
        assert sorted(seen) == sorted(r.id for r in rules)
        orders.append(seen)
    assert orders[0] != orders[1]


def test_open_session_resumes(rules_file, tmp_path):
    client, rules = make_client(rules_file, tmp_path)
    first = client.post("/sessions", json={"expert_id": "e1", "seed": 5}).json()
    nxt = client.get(f"/sessions/{first['session_id']}/next").json()
    client.post(f"/sessions/{first['session_id']}/assessments",
                json={"rule_id": nxt["card"]["rule_id"], "rating": 4, "elapsed_ms": 9})
    again = client.post("/sessions", json={"expert_id": "e1"}).json()
    assert again["session_id"] == first["session_id"]
    assert again["cursor"] == 1


def test_out_of_order_and_bad_rating_rejected(rules_file, tmp_path):
    client, rules = make_client(rules_file, tmp_path)
    session = client.post("/sessions", json={"expert_id": "e1", "seed": 6}).json()
    nxt = client.get(f"/sessions/{session['session_id']}/next").json()
    current = nxt["card"]["rule_id"]
    wrong = next(r.id for r in rules if r.id != current)
    resp = client.post(f"/sessions/{session['session_id']}/assessments",
                       json={"rule_id": wrong, "rating": 3, "elapsed_ms": 5})
    assert resp.status_code == 409
    resp = client.post(f"/sessions/{session['session_id']}/assessments",
                       json={"rule_id": current, "rating": 6, "elapsed_ms": 5})
    assert resp.status_code == 422
    # cursor unchanged after both rejections
    assert client.get(f"/sessions/{session['session_id']}/next").json()["cursor"] == 0


def test_duplicate_submission_is_idempotent(rules_file, tmp_path):
    client, rules = make_client(rules_file, tmp_path)
    session = client.post("/sessions", json={"expert_id": "e1", "seed": 7}).json()
    nxt = client.get(f"/sessions/{session['session_id']}/next").json()
    body = {"rule_id": nxt["card"]["rule_id"], "rating": 2, "elapsed_ms": 8}
    first = client.post(f"/sessions/{session['session_id']}/assessments", json=body).json()
    second = client.post(f"/sessions/{session['session_id']}/assessments", json=body).json()
    assert first["cursor"] == second["cursor"] == 1
    assert second["duplicate"] is True
    assert len(client.get("/export").json()) == 1


def test_no_outcome_statistics_in_payloads(rules_file, tmp_path):
    client, rules = make_client(rules_file, tmp_path)
    session = client.post("/sessions", json={"expert_id": "e1", "seed": 8}).json()
    forbidden = ("risk", "outcome", "mortality", "label", "death", "auc")
    for _ in range(len(rules)):
        nxt = client.get(f"/sessions/{session['session_id']}/next").json()
        if nxt["done"]:
            break
        blob = json.dumps(nxt).lower()
        assert not any(word in blob for word in forbidden)
        card = nxt["card"]
        assert set(card) == {"rule_id", "features"}
        for row in card["features"]:
            assert set(row) == {"name", "subpopulation", "population"}
        client.post(f"/sessions/{session['session_id']}/assessments",
                    json={"rule_id": card["rule_id"], "rating": 1, "elapsed_ms": 2})


def test_crash_resume_from_store(rules_file, tmp_path):
    path, rules = rules_file
    store_dir = tmp_path / "persist"
    app = build_app(path, store_dir, permutation_seed=2)
    client = TestClient(app)
    session = client.post("/sessions", json={"expert_id": "e1", "seed": 9}).json()
    served = []
    for _ in range(3):
        nxt = client.get(f"/sessions/{session['session_id']}/next").json()
        served.append(nxt["card"]["rule_id"])
        client.post(f"/sessions/{session['session_id']}/assessments",
                    json={"rule_id": served[-1], "rating": 3, "elapsed_ms": 4})

    # new process: rebuild the app over the same store
    app2 = build_app(path, store_dir, permutation_seed=2)
    client2 = TestClient(app2)
    resumed = client2.post("/sessions", json={"expert_id": "e1"}).json()
    assert resumed["session_id"] == session["session_id"]
    assert resumed["cursor"] == 3
    nxt = client2.get(f"/sessions/{resumed['session_id']}/next").json()
    assert nxt["cursor"] == 3
    assert nxt["card"]["rule_id"] not in served
    assert len(client2.get("/export").json()) == 3


def test_export_matches_direct_aggregation(rules_file, tmp_path):
    client, rules = make_client(rules_file, tmp_path)
    ratings = {}
    for e in range(3):
        expert = f"expert-{e}"

        def rate(card, e=e):
            value = 1 + (hash(card["rule_id"]) + e) % 5
            ratings.setdefault(card["rule_id"], []).append(value)
            return value

        run_expert(client, expert, rate=rate, seed=100 + e)
    exported = [assessment_from_dict(r) for r in client.get("/export").json()]
    via_http = aggregate(exported)
    direct = aggregate(
        [
            assessment_from_dict(
                {"expert_id": f"e{i}", "rule_id": rid, "rating": v,
                 "elapsed_ms": 0, "timestamp": 0.0}
            )
            for rid, values in ratings.items()
            for i, v in enumerate(values)
        ]
    )
    assert {(s.rule_id, s.mean_rating, s.stdev) for s in via_http} == {
        (s.rule_id, s.mean_rating, s.stdev) for s in direct
    }


def test_store_appends_monotonically(rules_file, tmp_path):
    client, rules = make_client(rules_file, tmp_path)
    run_expert(client, "e1", seed=1)
    first = client.get("/export").json()
    run_expert(client, "e2", seed=2)
    second = client.get("/export").json()
    assert len(second) == 2 * len(rules)
    as_set = {json.dumps(r, sort_keys=True) for r in first}
    assert as_set <= {json.dumps(r, sort_keys=True) for r in second}


def test_missing_cards_rejected(tmp_path, rules_file):
    path, rules = rules_file
    bare = tmp_path / "bare.jsonl"
    save_rule_export(bare, rules)  # no cards
    with pytest.raises(DataError):
        build_app(bare, tmp_path / "s2")


def test_static_ui_mount(rules_file, tmp_path):
    path, rules = rules_file
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body><div id='app'></div></body></html>")
    app = build_app(path, tmp_path / "store-ui", permutation_seed=1, ui_dir=ui)
    client = TestClient(app)
    assert client.get("/health").json()["status"] == "ok"
    page = client.get("/")
    assert page.status_code == 200
    assert "app" in page.text
