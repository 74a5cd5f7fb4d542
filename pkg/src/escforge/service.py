"""HTTP session service for live human interaction: chat with the
counselor+supporter stack as the seeker, optionally compare two models blind
(A/B with hidden randomized order), rate the session, export the transcript
in the corpus schema.
"""

from __future__ import annotations

import json
import random
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .corpus import SEEKER, SUPPORTER, STRATEGIES, Dialogue, ProblemType, SeekerProfile, Utterance, dialogue_to_record
from .counselor import Counselor
from .gateway import GatewayError
from .prompts import PromptLibrary
from .supporter import supporter_turn

RATING_METRICS = (
    "Empathy",
    "Informativeness",
    "Coherence",
    "Suggestion",
    "Understanding",
    "Helpfulness",
    "Overall",
)
AB_CHOICES = ("A wins", "Tie", "B wins")

_SESSION_PROFILE = SeekerProfile(
    name="live rater", gender="unspecified", address="unspecified",
    occupation="unspecified", personality="unspecified", hobbies="unspecified",
)


@dataclass
class SupportStack:
    """One counselor+supporter pairing the service can bind to an arm."""

    counselor: Counselor
    supporter_backend: object
    prompts: PromptLibrary
    exemplar: Dialogue | None = None
    history_window: int = 6
    sentence_cap: int = 3

    def reply(self, history: list[Utterance], rng: random.Random) -> Utterance:
        decision = self.counselor.decide(history, rng)
        utterance, _prompt = supporter_turn(
            decision.strategy,
            history,
            self.exemplar,
            self.supporter_backend,
            self.prompts,
            window=self.history_window,
            sentence_cap=self.sentence_cap,
        )
        return utterance


@dataclass
class Session:
    session_id: str
    arm: str
    scenario: str | None
    labels: tuple[str, ...]
    model_by_label: dict[str, str]
    rng: random.Random
    created_at: str
    transcripts: dict[str, list[Utterance]] = field(default_factory=dict)
    status: str = "open"
    rating: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self):
        for label in self.labels:
            self.transcripts.setdefault(label, [])


@dataclass
class ServiceSettings:
    models: dict[str, SupportStack]
    rng_seed: int = 0
    log_path: str | Path | None = None
    static_dir: str | Path | None = None
    cors_origins: tuple[str, ...] = ("*",)


class SessionStore:
    """In-memory session registry plus an append-only JSONL event log."""

    def __init__(self, settings: ServiceSettings):
        self.settings = settings
        self.sessions: dict[str, Session] = {}
        self.rng = random.Random(settings.rng_seed)
        self._lock = threading.Lock()
        self._log_lock = threading.Lock()

    def log_event(self, kind: str, payload: dict) -> None:
        if not self.settings.log_path:
            return
        record = {"event": kind, "at": datetime.now(timezone.utc).isoformat(), **payload}
        with self._log_lock:
            with open(self.settings.log_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")

    def create(self, arm: str, model_refs: list[str], scenario: str | None) -> Session:
        for ref in model_refs:
            if ref not in self.settings.models:
                raise HTTPException(status_code=400, detail=f"unknown model ref: {ref!r}")
        with self._lock:
            if arm == "single":
                if len(model_refs) != 1:
                    raise HTTPException(status_code=400, detail="single arm takes exactly one model ref")
                labels = ("single",)
                mapping = {"single": model_refs[0]}
            elif arm == "ab":
                if len(model_refs) != 2:
                    raise HTTPException(status_code=400, detail="ab arm takes exactly two model refs")
                labels = ("A", "B")
                ordered = list(model_refs)
                if self.rng.random() < 0.5:
                    ordered.reverse()
                mapping = {"A": ordered[0], "B": ordered[1]}
            else:
                raise HTTPException(status_code=400, detail=f"unknown arm: {arm!r}")
            session = Session(
                session_id=uuid.UUID(int=self.rng.getrandbits(128), version=4).hex,
                arm=arm,
                scenario=scenario,
                labels=labels,
                model_by_label=mapping,
                rng=random.Random(self.rng.getrandbits(64)),
                created_at=datetime.now(timezone.utc).isoformat(),
            )
            self.sessions[session.session_id] = session
        self.log_event("session_created", {"session_id": session.session_id, "arm": arm, "models": mapping})
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session


class CreateSessionBody(BaseModel):
    arm: str = "single"
    models: list[str]
    scenario: str | None = None


class MessageBody(BaseModel):
    text: str


class RatingBody(BaseModel):
    scores: dict[str, int] | None = None
    comment: str | None = None
    ab_choice: str | None = None


def _validate_rating(session: Session, body: RatingBody) -> dict:
    if session.arm == "ab":
        if body.ab_choice not in AB_CHOICES:
            raise HTTPException(status_code=400, detail=f"ab rating needs ab_choice in {AB_CHOICES}")
        return {"ab_choice": body.ab_choice, "comment": body.comment}
    scores = body.scores or {}
    missing = [m for m in RATING_METRICS if m not in scores]
    if missing:
        raise HTTPException(status_code=400, detail=f"missing metrics: {missing}")
    for metric in RATING_METRICS:
        value = scores[metric]
        if not isinstance(value, int) or not 1 <= value <= 5:
            raise HTTPException(status_code=400, detail=f"score for {metric} must be an integer in 1..5")
    return {"scores": {m: scores[m] for m in RATING_METRICS}, "comment": body.comment}


def session_to_record(session: Session) -> dict:
    """Serialize a session transcript in the corpus-model schema. In ab mode
    the first arm is the canonical utterance stream and both arms' supporter
    turns are kept under meta.ab_branches."""
    primary = session.labels[0]
    meta: dict = {
        "generator_tag": "live-session",
        "rng_seed": 0,
        "created_at": session.created_at,
        "arm": session.arm,
    }
    if session.rating is not None:
        meta["rating"] = session.rating
        meta["models"] = session.model_by_label
    if session.arm == "ab":
        meta["ab_branches"] = {
            label: [u.to_dict() for u in session.transcripts[label] if u.speaker == SUPPORTER]
            for label in session.labels
        }
    dialogue = Dialogue(
        id=f"session-{session.session_id}",
        problem_type=ProblemType(category="Live", name="Live Session"),
        scenario=session.scenario or "",
        profile=_SESSION_PROFILE,
        utterances=tuple(session.transcripts[primary]),
        meta=meta,
    )
    return dialogue_to_record(dialogue)


def create_app(settings: ServiceSettings) -> FastAPI:
    app = FastAPI(title="escforge live evaluation service")
    store = SessionStore(settings)
    app.state.store = store

    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(settings.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/strategies")
    def strategies():
        return {"strategies": list(STRATEGIES)}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        session = store.create(body.arm, body.models, body.scenario)
        return {"session_id": session.session_id, "arm": session.arm, "labels": list(session.labels)}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody):
        session = store.get(session_id)
        text = body.text.strip()
        if not text:
            raise HTTPException(status_code=400, detail="empty message text")
        with session.lock:
            if session.status != "open":
                raise HTTPException(status_code=409, detail="session is closed")
            seeker_utterance = Utterance(speaker=SEEKER, text=text)
            replies: list[tuple[str, Utterance]] = []
            try:
                for label in session.labels:
                    stack = settings.models[session.model_by_label[label]]
                    history = session.transcripts[label] + [seeker_utterance]
                    replies.append((label, stack.reply(history, session.rng)))
            except GatewayError as exc:
                for label in session.labels:
                    session.transcripts[label].append(seeker_utterance)
                store.log_event("message_failed", {"session_id": session_id, "error": str(exc)})
                raise HTTPException(status_code=502, detail=f"backend failure: {exc}") from None
            for label, reply in replies:
                session.transcripts[label].append(seeker_utterance)
                session.transcripts[label].append(reply)
        store.log_event("message", {"session_id": session_id, "text": text})
        return {
            "replies": [
                {"label": label, "text": reply.text, "strategy": reply.strategy} for label, reply in replies
            ]
        }

    @app.post("/sessions/{session_id}/rating")
    def submit_rating(session_id: str, body: RatingBody):
        session = store.get(session_id)
        with session.lock:
            if session.status != "open" or session.rating is not None:
                raise HTTPException(status_code=409, detail="session already rated")
            rating = _validate_rating(session, body)
            session.rating = rating
            session.status = "closed"
        store.log_event(
            "rating",
            {"session_id": session_id, "rating": rating, "unblinded_mapping": session.model_by_label},
        )
        return {"stored": True, "unblinded_mapping": session.model_by_label}

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            record = session_to_record(session)
        store.log_event("export", {"session_id": session_id})
        return record

    if settings.static_dir and Path(settings.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(settings.static_dir), html=True), name="ui")

    return app
