"""HTTP questionnaire service: serves rule cards one at a time in a
per-session random order and persists ratings to an append-only store.

Durability model: two JSONL logs under the store directory. ``sessions.jsonl``
records each session's expert and permutation; ``assessments.jsonl`` records
one rating per line. A session's cursor is the number of ratings recorded
for it, so a restarted process resumes every session exactly where it
stopped. Served payloads contain feature statistics only; no outcome or
risk figure ever reaches a rater.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .elicitation import ExpertAssessment
from .serialization import assessment_from_dict, assessment_to_dict, load_rule_export
from .validation import DataError

SESSIONS_LOG = "sessions.jsonl"
ASSESSMENTS_LOG = "assessments.jsonl"


class SessionCreate(BaseModel):
    expert_id: str = Field(min_length=1)
    seed: int | None = None


class AssessmentSubmit(BaseModel):
    rule_id: str
    rating: int = Field(ge=1, le=5)
    elapsed_ms: int = Field(ge=0)


class Session:
    def __init__(self, session_id, expert_id, order, seq, started_at=None):
        self.session_id = session_id
        self.expert_id = expert_id
        self.order = list(order)
        self.seq = seq  # creation index, for stable export ordering
        self.started_at = time.time() if started_at is None else started_at
        self.cursor = 0
        self.last_rating = None

    def summary(self):
        return {
            "session_id": self.session_id,
            "expert_id": self.expert_id,
            "cursor": self.cursor,
            "total": len(self.order),
            "started_at": self.started_at,
        }


class ElicitationStore:
    """Append-only persistence with a single serialized writer."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.sessions: dict[str, Session] = {}
        self.records: list[dict] = []  # raw assessment lines, append order
        self._load()

    def _load(self):
        sessions_path = self.directory / SESSIONS_LOG
        if sessions_path.exists():
            with open(sessions_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    session = Session(rec["session_id"], rec["expert_id"],
                                      rec["order"], rec["seq"],
                                      started_at=rec.get("started_at"))
                    self.sessions[session.session_id] = session
        path = self.directory / ASSESSMENTS_LOG
        if path.exists():
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    self.records.append(rec)
                    session = self.sessions.get(rec["session_id"])
                    if session is not None:
                        session.cursor += 1
                        session.last_rating = rec["rating"]

    def _append(self, filename, payload):
        with open(self.directory / filename, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def open_session_for(self, expert_id):
        for session in self.sessions.values():
            if session.expert_id == expert_id and session.cursor < len(session.order):
                return session
        return None

    def create_session(self, expert_id, order):
        with self._lock:
            session = Session(uuid.uuid4().hex[:16], expert_id, order, seq=len(self.sessions))
            self.sessions[session.session_id] = session
            self._append(SESSIONS_LOG, {
                "session_id": session.session_id,
                "expert_id": session.expert_id,
                "order": session.order,
                "seq": session.seq,
                "started_at": session.started_at,
            })
            return session

    def record_assessment(self, session, rule_id, rating, elapsed_ms):
        with self._lock:
            payload = assessment_to_dict(ExpertAssessment(
                expert_id=session.expert_id,
                rule_id=rule_id,
                rating=rating,
                elapsed_ms=elapsed_ms,
                timestamp=time.time(),
            ))
            payload["session_id"] = session.session_id
            payload["position"] = session.cursor
            self._append(ASSESSMENTS_LOG, payload)
            self.records.append(payload)
            session.cursor += 1
            session.last_rating = rating

    def export(self):
        ordered = sorted(
            self.records,
            key=lambda r: (r["expert_id"], self.sessions[r["session_id"]].seq, r["position"]),
        )
        return [assessment_from_dict(r) for r in ordered]


def build_app(rules_path, store_dir, permutation_seed=None, ui_dir=None) -> FastAPI:
    rules, _, cards = load_rule_export(rules_path)
    missing = [r.id for r in rules if r.id not in cards]
    if missing:
        raise DataError(f"rule export lacks cards for {len(missing)} rules, e.g. {missing[:3]}")
    rule_ids = [r.id for r in rules]
    store = ElicitationStore(store_dir)
    entropy = np.random.default_rng(permutation_seed)

    app = FastAPI(title="rule questionnaire")
    app.state.store = store

    @app.get("/health")
    def health():
        return {"status": "ok", "rules": len(rule_ids)}

    @app.post("/sessions")
    def start_session(body: SessionCreate):
        existing = store.open_session_for(body.expert_id)
        if existing is not None:
            return existing.summary()
        rng = np.random.default_rng(body.seed) if body.seed is not None else entropy
        order = [rule_ids[i] for i in rng.permutation(len(rule_ids))]
        return store.create_session(body.expert_id, order).summary()

    def _get_session(session_id) -> Session:
        session = store.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.get("/sessions/{session_id}/next")
    def next_rule(session_id: str):
        session = _get_session(session_id)
        if session.cursor >= len(session.order):
            return {"done": True, "cursor": session.cursor, "total": len(session.order)}
        card = cards[session.order[session.cursor]]
        return {
            "done": False,
            "cursor": session.cursor,
            "total": len(session.order),
            "card": card.to_payload(),
        }

    @app.post("/sessions/{session_id}/assessments")
    def submit(session_id: str, body: AssessmentSubmit):
        session = _get_session(session_id)
        # exact duplicate of the previous submission: acknowledge, do not append
        if (
            session.cursor > 0
            and session.order[session.cursor - 1] == body.rule_id
            and session.last_rating == body.rating
        ):
            return {"ok": True, "cursor": session.cursor, "duplicate": True}
        if session.cursor >= len(session.order):
            raise HTTPException(status_code=409, detail="session already complete")
        expected = session.order[session.cursor]
        if body.rule_id != expected:
            raise HTTPException(
                status_code=409,
                detail=f"out-of-order submission: expected rule {expected}",
            )
        store.record_assessment(session, body.rule_id, body.rating, body.elapsed_ms)
        return {"ok": True, "cursor": session.cursor, "duplicate": False}

    @app.get("/export")
    def export():
        return [assessment_to_dict(a) for a in store.export()]

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
