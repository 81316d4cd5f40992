"""Interactive diagnostic sessions: the state machine tying both filter stages,
answer generation, and follow-up chat into one resumable conversation.

Sessions are event-sourced: every state change is an appended event, state is
a pure fold over events, and the persisted JSON transcript replays to an
identical session. Every LM request/response and every user message lands in
the event log, which is what makes the pipeline's reasoning auditable.
Image payloads are forwarded to the encoder and never persisted.
"""

from __future__ import annotations

import enum
import json
import os
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from .dialogue import (
    DEFAULT_QUESTION_COUNT,
    DEFAULT_STAGE2_THRESHOLD,
    ClarifyingQuestion,
    LikelihoodVerdict,
    UserResponse,
    generate_questions,
    stage2_filter,
)
from .encoders import EncoderClient, encode_query
from .errors import UnknownSession, WrongState
from .graph import ConditionGraph
from .llm import AgentRole, AgentRouter
from .prompts import (
    TemplateRegistry,
    build_answer_prompt,
    build_bundles,
    build_follow_up_prompt,
    format_qa_transcript,
)
from .retrieval import CandidateSet, RetrievalConfig, ScoredCondition, Via, stage1_filter
from .vectors import QueryInput

TRANSCRIPT_VERSION = 1


class SessionState(enum.Enum):
    AWAITING_INPUT = "awaiting_input"
    STAGE1_COMPLETE = "stage1_complete"
    AWAITING_ANSWERS = "awaiting_answers"
    STAGE2_COMPLETE = "stage2_complete"
    ANSWERED = "answered"
    CLOSED = "closed"


@dataclass
class EngineConfig:
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    question_count: int = DEFAULT_QUESTION_COUNT
    stage2_threshold: float = DEFAULT_STAGE2_THRESHOLD
    # single sharp match skips the question round entirely
    shortcut_score: float = 0.999


@dataclass
class Session:
    """State folded from an append-only, totally ordered event log."""

    id: str
    state: SessionState = SessionState.AWAITING_INPUT
    query_text: str = ""
    has_image: bool = False
    candidates: Optional[CandidateSet] = None
    candidate_names: Dict[str, str] = field(default_factory=dict)
    questions: List[ClarifyingQuestion] = field(default_factory=list)
    responses: List[UserResponse] = field(default_factory=list)
    verdicts: List[LikelihoodVerdict] = field(default_factory=list)
    filtered: Optional[CandidateSet] = None
    answer_basis: List[str] = field(default_factory=list)
    fallback_used: bool = False
    answer_text: str = ""
    events: List[dict] = field(default_factory=list)

    def record(self, event_type: str, data: dict) -> dict:
        event = {"seq": len(self.events), "type": event_type, "data": data}
        self.events.append(event)
        self._apply(event)
        return event

    def _entry_from(self, payload: dict) -> ScoredCondition:
        return ScoredCondition(condition_id=payload["id"], score=payload["score"],
                               via=Via(payload["via"]))

    def _apply(self, event: dict) -> None:
        etype, data = event["type"], event["data"]
        if etype == "session_started":
            self.query_text = data["text"]
            self.has_image = data["has_image"]
        elif etype == "stage1_completed":
            self.candidates = CandidateSet(
                entries=[self._entry_from(c) for c in data["candidates"]])
            self.candidate_names = {c["id"]: c["name"] for c in data["candidates"]}
            self.state = SessionState.STAGE1_COMPLETE
        elif etype == "questions_generated":
            self.questions = [
                ClarifyingQuestion(id=q["id"], text=q["text"],
                                   origin_ids=list(q["origin_ids"]))
                for q in data["questions"]]
            self.state = SessionState.AWAITING_ANSWERS
        elif etype == "answers_submitted":
            self.responses = [
                UserResponse(question_id=r["question_id"], text=r["text"],
                             skipped=r["skipped"], timestamp=r["timestamp"])
                for r in data["responses"]]
        elif etype == "stage2_completed":
            self.verdicts = [
                LikelihoodVerdict(condition_id=v["condition"],
                                  likelihood=v["likelihood"],
                                  rationale=v["rationale"])
                for v in data["verdicts"]]
            by_id = {e.condition_id: e for e in self.candidates.entries} \
                if self.candidates else {}
            self.filtered = CandidateSet(
                entries=[by_id[i] for i in data["kept"] if i in by_id])
            self.answer_basis = list(data["answer_basis"])
            self.fallback_used = data["fallback_used"]
            self.state = SessionState.STAGE2_COMPLETE
        elif etype == "answer_ready":
            self.answer_text = data["text"]
            self.state = SessionState.ANSWERED
        elif etype == "lm_exchange":
            pass  # audit trail only; carries no state
        elif etype == "user_message":
            pass
        elif etype == "assistant_reply":
            pass
        elif etype == "closed":
            self.state = SessionState.CLOSED
        else:
            raise ValueError(f"unknown event type {etype!r}")

    def to_payload(self) -> dict:
        return {"version": TRANSCRIPT_VERSION, "session_id": self.id,
                "events": self.events}

    @property
    def last_reply(self) -> str:
        for event in reversed(self.events):
            if event["type"] == "assistant_reply":
                return event["data"]["text"]
        return self.answer_text


def replay_session(payload: dict) -> Session:
    """Fold a persisted transcript back into an identical Session."""
    if payload.get("version") != TRANSCRIPT_VERSION:
        raise ValueError(f"unsupported transcript version {payload.get('version')}")
    session = Session(id=payload["session_id"])
    for event in payload["events"]:
        session.events.append(event)
        session._apply(event)
    return session


def format_transcript(session: Session) -> str:
    """Human-readable chronology used by the follow-up prompt."""
    lines: List[str] = []
    questions_by_id = {q.id: q for q in session.questions}
    for event in session.events:
        etype, data = event["type"], event["data"]
        if etype == "session_started":
            lines.append(f"Patient: {data['text']}")
        elif etype == "answers_submitted":
            for i, r in enumerate(data["responses"], start=1):
                question = questions_by_id.get(r["question_id"])
                q_text = question.text if question else r["question_id"]
                answer = "(no answer given)" if r["skipped"] else r["text"]
                lines.append(f"Q{i}: {q_text}")
                lines.append(f"A{i}: {answer}")
        elif etype == "answer_ready":
            lines.append(f"Assistant: {data['text']}")
        elif etype == "user_message":
            lines.append(f"Patient: {data['text']}")
        elif etype == "assistant_reply":
            lines.append(f"Assistant: {data['text']}")
    return "\n".join(lines)


class SessionStore:
    """One JSON transcript file per session id, written atomically."""

    def __init__(self, directory: str):
        self._dir = directory
        os.makedirs(directory, exist_ok=True)

    def _path(self, session_id: str) -> str:
        return os.path.join(self._dir, f"{session_id}.json")

    def save(self, session: Session) -> None:
        path = self._path(session.id)
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(session.to_payload(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)

    def load(self, session_id: str) -> Session:
        path = self._path(session_id)
        if not os.path.exists(path):
            raise UnknownSession(session_id)
        with open(path, encoding="utf-8") as fh:
            return replay_session(json.load(fh))

    def exists(self, session_id: str) -> bool:
        return os.path.exists(self._path(session_id))


class _RecordingRouter:
    """Router wrapper that logs every exchange into the session transcript."""

    def __init__(self, router: AgentRouter, session: Session):
        self._router = router
        self._session = session

    def complete(self, role: AgentRole, prompt: str):
        response = self._router.complete(role, prompt)
        self._session.record("lm_exchange", {
            "role": role.value, "prompt": prompt,
            "response": response.text, "backend": response.backend_id,
        })
        return response


def sequential_ids(prefix: str = "s") -> Callable[[], str]:
    """Deterministic session-id factory for tests, fixtures, and scripted runs."""
    counter = {"n": 0}

    def factory() -> str:
        counter["n"] += 1
        return f"{prefix}-{counter['n']:06d}"

    return factory


def counting_clock(start: float = 1.0, step: float = 1.0) -> Callable[[], float]:
    """Deterministic clock for reproducible transcripts."""
    state = {"t": start - step}

    def clock() -> float:
        state["t"] += step
        return state["t"]

    return clock


class DiagnosticEngine:
    """Drives sessions through input -> stage 1 -> questions -> stage 2 -> answer.

    One logical writer per session is assumed (the service serializes
    requests per session id); distinct sessions may run fully concurrently
    since the graph, templates, and clients are all read-only/shareable.
    """

    def __init__(self, graph: ConditionGraph, registry: TemplateRegistry,
                 router: AgentRouter, encoder: EncoderClient,
                 config: Optional[EngineConfig] = None,
                 store: Optional[SessionStore] = None,
                 id_factory: Optional[Callable[[], str]] = None,
                 clock: Optional[Callable[[], float]] = None):
        self.graph = graph
        self.registry = registry
        self.router = router
        self.encoder = encoder
        self.config = config or EngineConfig()
        self.store = store
        self._id_factory = id_factory or (lambda: uuid.uuid4().hex)
        self._clock = clock or time.time

    def _persist(self, session: Session) -> None:
        if self.store is not None:
            self.store.save(session)

    def _candidate_payload(self, candidates: CandidateSet) -> List[dict]:
        return [{"id": e.condition_id, "name": self.graph.nodes[e.condition_id].name,
                 "score": e.score, "via": e.via.value}
                for e in candidates.entries]

    def start(self, query: QueryInput) -> Session:
        """Encode the query, run Stage-1, and generate clarifying questions.

        Ends in AWAITING_ANSWERS, or in STAGE2_COMPLETE when a single
        candidate scores above the shortcut threshold (asking discriminative
        questions about one option is vacuous); submit an empty answer list
        to collect the final answer in that case.
        """
        session = Session(id=self._id_factory())
        session.record("session_started", {
            "text": query.text,
            "has_image": query.image_ref is not None,
            "lambda": self.config.retrieval.lam,
            "relative_threshold": self.config.retrieval.relative_threshold,
        })
        encoding = encode_query(self.encoder, query)
        candidates = stage1_filter(self.graph, encoding, self.config.retrieval)
        session.record("stage1_completed", {
            "candidates": self._candidate_payload(candidates)})

        if (len(candidates) == 1
                and candidates.entries[0].score >= self.config.shortcut_score):
            only = candidates.entries[0].condition_id
            session.record("stage2_completed", {
                "verdicts": [], "kept": [only], "answer_basis": [only],
                "fallback_used": False, "shortcut": True,
            })
        else:
            recording = _RecordingRouter(self.router, session)
            questions = generate_questions(
                self.registry, recording, self.graph, candidates,
                query.text, self.config.question_count)
            session.record("questions_generated", {
                "questions": [{"id": q.id, "text": q.text,
                               "origin_ids": q.origin_ids} for q in questions]})
        self._persist(session)
        return session

    def _check_coverage(self, session: Session, responses: List[dict]) -> List[UserResponse]:
        outstanding = {q.id for q in session.questions}
        seen = set()
        stamped = []
        for r in responses:
            qid = r["question_id"]
            if qid not in outstanding:
                raise ValueError(f"unknown question id {qid!r}")
            if qid in seen:
                raise ValueError(f"duplicate answer for question {qid!r}")
            seen.add(qid)
            skipped = bool(r.get("skip", False))
            text = "" if skipped else str(r.get("text", ""))
            if not skipped and not text.strip():
                skipped = True
                text = ""
            stamped.append(UserResponse(question_id=qid, text=text,
                                        skipped=skipped,
                                        timestamp=self._clock()))
        missing = outstanding - seen
        if missing:
            raise ValueError(f"unanswered questions: {sorted(missing)}")
        return stamped

    def submit_answers(self, session: Session, responses: List[dict]) -> Session:
        """Run Stage-2 on the answers, then generate the final answer.

        `responses` entries are {"question_id", "text"} or {"question_id",
        "skip": true}. From the shortcut state, an empty list is expected.
        """
        if session.state == SessionState.STAGE2_COMPLETE:
            if responses:
                raise ValueError("this session has no outstanding questions")
            self._generate_answer(session)
            self._persist(session)
            return session
        if session.state != SessionState.AWAITING_ANSWERS:
            raise WrongState(f"cannot submit answers in state {session.state.value}")

        stamped = self._check_coverage(session, responses)
        session.record("answers_submitted", {
            "responses": [{"question_id": r.question_id, "text": r.text,
                           "skipped": r.skipped, "timestamp": r.timestamp}
                          for r in stamped]})

        recording = _RecordingRouter(self.router, session)
        filtered, verdicts = stage2_filter(
            self.registry, recording, self.graph, session.candidates,
            session.questions, stamped, session.query_text,
            self.config.stage2_threshold)

        fallback = not filtered.entries
        if fallback:
            # surface the top Stage-1 candidate with a low-confidence note
            # rather than a dead end
            basis = [session.candidates.entries[0].condition_id]
        else:
            basis = filtered.ids
        session.record("stage2_completed", {
            "verdicts": [{"condition": v.condition_id,
                          "likelihood": v.likelihood,
                          "rationale": v.rationale} for v in verdicts],
            "kept": filtered.ids,
            "answer_basis": basis,
            "fallback_used": fallback,
            "shortcut": False,
        })
        self._generate_answer(session)
        self._persist(session)
        return session

    def _basis_entries(self, session: Session) -> List[ScoredCondition]:
        by_id = {e.condition_id: e for e in session.candidates.entries}
        return [by_id[i] for i in session.answer_basis]

    def _generate_answer(self, session: Session) -> None:
        bundles = build_bundles(self.graph, self._basis_entries(session))
        qa = format_qa_transcript(session.questions, session.responses)
        prompt = build_answer_prompt(self.registry, bundles, session.query_text,
                                     qa, low_confidence=session.fallback_used)
        recording = _RecordingRouter(self.router, session)
        response = recording.complete(AgentRole.INTERACTION, prompt)
        session.record("answer_ready", {"text": response.text})

    def follow_up(self, session: Session, message: str) -> Session:
        """Answer a follow-up message from the filtered conditions' graph text
        plus the full transcript; no re-retrieval within a session."""
        if session.state != SessionState.ANSWERED:
            raise WrongState(f"cannot follow up in state {session.state.value}")
        if not message or not message.strip():
            raise ValueError("follow-up message must be non-empty")
        session.record("user_message", {"text": message})
        bundles = build_bundles(self.graph, self._basis_entries(session))
        prompt = build_follow_up_prompt(self.registry, bundles,
                                        format_transcript(session), message)
        recording = _RecordingRouter(self.router, session)
        response = recording.complete(AgentRole.INTERACTION, prompt)
        session.record("assistant_reply", {"text": response.text})
        self._persist(session)
        return session

    def close(self, session: Session) -> Session:
        if session.state != SessionState.ANSWERED:
            raise WrongState(f"cannot close in state {session.state.value}")
        session.record("closed", {})
        self._persist(session)
        return session
