"""HTTP API over the diagnostic engine: sessions, graph listing, health.

JSON-only, versioned under /v1. Request handling is fully concurrent;
requests for the same session id are serialized with a per-session lock so
double-submits observe the state guard (409) instead of racing. Raw prompts
never appear in responses unless the debug-transcripts flag is on, and
backend credentials never appear at all.
"""

from __future__ import annotations

import logging
import os
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from fastapi import FastAPI, Header, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import graph as graph_store
from .encoders import ENCODER_URL_ENV, EncoderClient, make_encoder
from .errors import (
    BackendUnavailable,
    EncoderUnavailable,
    GraphTriageError,
    ScriptExhausted,
    UnknownSession,
    UnparseableLikelihood,
    UnparseableQuestions,
    WrongState,
)
from .llm import AgentRole, AgentRouter, HttpChatBackend, ScriptedBackend
from .prompts import TemplateRegistry
from .retrieval import RetrievalConfig
from .session import (
    DiagnosticEngine,
    EngineConfig,
    Session,
    SessionStore,
    counting_clock,
    sequential_ids,
)
from .vectors import QueryInput

logger = logging.getLogger(__name__)

_ROLE_ENV_PREFIXES = {
    AgentRole.QUESTION: "GRAPHTRIAGE_QUESTION_LM",
    AgentRole.REASONING: "GRAPHTRIAGE_REASONING_LM",
    AgentRole.INTERACTION: "GRAPHTRIAGE_INTERACTION_LM",
}


@dataclass
class ApiConfig:
    graph_path: str
    host: str = "127.0.0.1"
    port: int = 8080
    templates_dir: Optional[str] = None
    encoder_spec: str = "test:0"
    scripted_lm_path: Optional[str] = None
    lm_endpoints: Dict[AgentRole, dict] = field(default_factory=dict)
    lam: float = 0.4
    relative_threshold: float = 0.95
    stage2_threshold: float = 0.5
    question_count: int = 3
    sessions_dir: Optional[str] = None
    cors_origins: List[str] = field(default_factory=list)
    api_token: Optional[str] = None
    debug_transcripts: bool = False
    deterministic_ids: bool = False

    @classmethod
    def from_env(cls) -> "ApiConfig":
        graph_path = os.environ.get("GRAPHTRIAGE_GRAPH")
        if not graph_path:
            raise ValueError("GRAPHTRIAGE_GRAPH must point to a persisted graph file")
        endpoints = {}
        for role, prefix in _ROLE_ENV_PREFIXES.items():
            url = os.environ.get(f"{prefix}_URL")
            if url:
                endpoints[role] = {
                    "url": url,
                    "model": os.environ.get(f"{prefix}_MODEL", "default"),
                    "api_key_env": os.environ.get(f"{prefix}_API_KEY_ENV"),
                }
        cors = os.environ.get("GRAPHTRIAGE_CORS_ORIGINS", "")
        return cls(
            graph_path=graph_path,
            host=os.environ.get("GRAPHTRIAGE_HOST", "127.0.0.1"),
            port=int(os.environ.get("GRAPHTRIAGE_PORT", "8080")),
            templates_dir=os.environ.get("GRAPHTRIAGE_TEMPLATES_DIR"),
            encoder_spec=os.environ.get(ENCODER_URL_ENV, "test:0"),
            scripted_lm_path=os.environ.get("GRAPHTRIAGE_SCRIPTED_LM"),
            lm_endpoints=endpoints,
            lam=float(os.environ.get("GRAPHTRIAGE_LAMBDA", "0.4")),
            relative_threshold=float(
                os.environ.get("GRAPHTRIAGE_RELATIVE_THRESHOLD", "0.95")),
            stage2_threshold=float(
                os.environ.get("GRAPHTRIAGE_STAGE2_THRESHOLD", "0.5")),
            question_count=int(os.environ.get("GRAPHTRIAGE_QUESTION_COUNT", "3")),
            sessions_dir=os.environ.get("GRAPHTRIAGE_SESSIONS_DIR"),
            cors_origins=[o for o in cors.split(",") if o],
            api_token=os.environ.get("GRAPHTRIAGE_API_TOKEN"),
            debug_transcripts=os.environ.get(
                "GRAPHTRIAGE_DEBUG_TRANSCRIPTS", "") in ("1", "true"),
        )


def _build_router(config: ApiConfig) -> AgentRouter:
    if config.scripted_lm_path:
        return AgentRouter.scripted(ScriptedBackend.from_file(config.scripted_lm_path))
    backends = {}
    for role in AgentRole:
        endpoint = config.lm_endpoints.get(role)
        if endpoint is None:
            raise ValueError(f"no LM endpoint configured for role {role.value}")
        key_env = endpoint.get("api_key_env")
        backends[role] = HttpChatBackend(
            endpoint["url"], endpoint["model"],
            api_key=os.environ.get(key_env) if key_env else None)
    return AgentRouter(backends)


class StartSessionBody(BaseModel):
    text: str
    image_base64: Optional[str] = None


class AnswerItem(BaseModel):
    question_id: str
    text: Optional[str] = None
    skip: bool = False


class AnswersBody(BaseModel):
    answers: List[AnswerItem]


class MessageBody(BaseModel):
    text: str


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    payload = {"error": {"code": code, "message": message, **extra}}
    return JSONResponse(status_code=status, content=payload)


def _candidates_payload(session: Session) -> List[dict]:
    return [{"id": e.condition_id,
             "name": session.candidate_names.get(e.condition_id, e.condition_id),
             "score": e.score, "via": e.via.value}
            for e in (session.candidates.entries if session.candidates else [])]


def _questions_payload(session: Session) -> List[dict]:
    return [{"id": q.id, "text": q.text} for q in session.questions]


def _verdicts_payload(session: Session) -> List[dict]:
    return [{"condition": v.condition_id, "likelihood": v.likelihood,
             "rationale": v.rationale} for v in session.verdicts]


def create_app(config: ApiConfig) -> FastAPI:
    """Build the service: loads the graph, wires clients, registers routes."""
    graph = graph_store.load_file(config.graph_path)
    encoder: EncoderClient = make_encoder(config.encoder_spec, graph.dimension)
    if encoder.dimension() != graph.dimension:
        raise ValueError("encoder dimension does not match graph dimension")
    registry = TemplateRegistry.with_overrides(config.templates_dir)
    router = _build_router(config)
    store = SessionStore(config.sessions_dir) if config.sessions_dir else None
    engine = DiagnosticEngine(
        graph, registry, router, encoder,
        config=EngineConfig(
            retrieval=RetrievalConfig(lam=config.lam,
                                      relative_threshold=config.relative_threshold),
            question_count=config.question_count,
            stage2_threshold=config.stage2_threshold,
        ),
        store=store,
        id_factory=sequential_ids() if config.deterministic_ids else None,
        clock=counting_clock() if config.deterministic_ids else None,
    )

    app = FastAPI(title="graphtriage", version="1.0")
    if config.cors_origins:
        app.add_middleware(CORSMiddleware, allow_origins=config.cors_origins,
                           allow_methods=["*"], allow_headers=["*"])

    sessions: Dict[str, Session] = {}
    locks: Dict[str, threading.Lock] = {}
    registry_lock = threading.Lock()

    def session_lock(session_id: str) -> threading.Lock:
        with registry_lock:
            return locks.setdefault(session_id, threading.Lock())

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None and store is not None and store.exists(session_id):
            session = store.load(session_id)  # resume across restarts
            sessions[session_id] = session
        if session is None:
            raise UnknownSession(session_id)
        return session

    def check_token(authorization: Optional[str]) -> Optional[JSONResponse]:
        if config.api_token is None:
            return None
        if authorization != f"Bearer {config.api_token}":
            return _error(401, "unauthorized", "missing or invalid bearer token")
        return None

    @app.exception_handler(GraphTriageError)
    def handle_domain_error(request: Request, exc: GraphTriageError):
        if isinstance(exc, UnknownSession):
            return _error(404, "unknown_session", str(exc))
        if isinstance(exc, WrongState):
            return _error(409, "wrong_state", str(exc))
        if isinstance(exc, EncoderUnavailable):
            return _error(502, "backend_unavailable", str(exc), backend="encoder")
        if isinstance(exc, BackendUnavailable):
            return _error(502, "backend_unavailable", str(exc), backend=exc.backend)
        if isinstance(exc, (UnparseableLikelihood, UnparseableQuestions,
                            ScriptExhausted)):
            return _error(502, "backend_output_invalid", str(exc), backend="lm")
        return _error(400, "validation", str(exc))

    @app.exception_handler(ValueError)
    def handle_value_error(request: Request, exc: ValueError):
        return _error(400, "validation", str(exc))

    @app.get("/v1/health")
    def health():
        try:
            encoder.encode_text("health probe")
            encoder_ok = True
        except GraphTriageError:
            encoder_ok = False
        return {"status": "ok", "graph_nodes": len(graph.nodes),
                "encoder_ok": encoder_ok, "lm_ok": router.ping()}

    @app.get("/v1/graph/conditions")
    def list_conditions():
        return {"count": len(graph.nodes), "conditions": [
            {"id": node_id, "name": graph.nodes[node_id].name,
             "neighbor_count": len(graph.adjacency.get(node_id, ()))}
            for node_id in graph.node_ids]}

    @app.post("/v1/sessions", status_code=201)
    def start_session(body: StartSessionBody,
                      authorization: Optional[str] = Header(default=None)):
        denied = check_token(authorization)
        if denied:
            return denied
        if not body.text or not body.text.strip():
            return _error(400, "validation", "text must be non-empty")
        image_ref = f"b64:{body.image_base64}" if body.image_base64 else None
        session = engine.start(QueryInput(text=body.text, image_ref=image_ref))
        sessions[session.id] = session
        return {"session_id": session.id, "state": session.state.value,
                "candidates": _candidates_payload(session),
                "questions": _questions_payload(session)}

    @app.post("/v1/sessions/{session_id}/answers")
    def submit_answers(session_id: str, body: AnswersBody,
                       authorization: Optional[str] = Header(default=None)):
        denied = check_token(authorization)
        if denied:
            return denied
        with session_lock(session_id):
            session = get_session(session_id)
            responses = [{"question_id": a.question_id,
                          "text": a.text or "", "skip": a.skip}
                         for a in body.answers]
            engine.submit_answers(session, responses)
        return {"state": session.state.value,
                "verdicts": _verdicts_payload(session),
                "answer_text": session.answer_text}

    @app.post("/v1/sessions/{session_id}/message")
    def follow_up(session_id: str, body: MessageBody,
                  authorization: Optional[str] = Header(default=None)):
        denied = check_token(authorization)
        if denied:
            return denied
        with session_lock(session_id):
            session = get_session(session_id)
            engine.follow_up(session, body.text)
        return {"reply_text": session.last_reply}

    @app.get("/v1/sessions/{session_id}")
    def get_transcript(session_id: str,
                       authorization: Optional[str] = Header(default=None)):
        denied = check_token(authorization)
        if denied:
            return denied
        session = get_session(session_id)
        events = []
        for event in session.events:
            if event["type"] == "lm_exchange" and not config.debug_transcripts:
                data = {k: v for k, v in event["data"].items() if k != "prompt"}
                events.append({"seq": event["seq"], "type": event["type"],
                               "data": data})
            else:
                events.append(event)
        return {"session_id": session.id, "state": session.state.value,
                "query": {"text": session.query_text,
                          "has_image": session.has_image},
                "candidates": _candidates_payload(session),
                "questions": _questions_payload(session),
                "verdicts": _verdicts_payload(session),
                "answer_text": session.answer_text,
                "transcript": events}

    app.state.engine = engine
    app.state.graph = graph
    return app


def serve(config: ApiConfig) -> None:  # pragma: no cover - thin uvicorn wrapper
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
