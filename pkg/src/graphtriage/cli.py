"""Operator CLI: dataset ingestion, terminal query sessions, QA evaluation,
and the lambda ablation sweep.

All commands are deterministic under `--scripted` LM backends and `test:`
encoders: stable exit codes (2 = validation, 3 = encoder/backend failure),
stable output bytes, stable graph files.
"""

from __future__ import annotations

import json
import sys
from typing import List, Optional, Tuple

import click

from . import graph as graph_store
from .encoders import make_encoder
from .errors import (
    BackendUnavailable,
    EmptyRecordSet,
    EncoderUnavailable,
    GraphTriageError,
)
from .graph import EdgePolicy
from .llm import AgentRole, AgentRouter, HttpChatBackend, ScriptedBackend
from .prompts import TemplateRegistry
from .retrieval import RetrievalConfig
from .session import (
    DiagnosticEngine,
    EngineConfig,
    SessionState,
    counting_clock,
    sequential_ids,
)
from .vectors import QueryInput

EXIT_VALIDATION = 2
EXIT_BACKEND = 3


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _router_from_env() -> AgentRouter:
    from .service import _ROLE_ENV_PREFIXES
    import os

    backends = {}
    for role, prefix in _ROLE_ENV_PREFIXES.items():
        url = os.environ.get(f"{prefix}_URL")
        if not url:
            _fail(f"no scripted file given and {prefix}_URL is not set",
                  EXIT_VALIDATION)
        key_env = os.environ.get(f"{prefix}_API_KEY_ENV")
        backends[role] = HttpChatBackend(
            url, os.environ.get(f"{prefix}_MODEL", "default"),
            api_key=os.environ.get(key_env) if key_env else None)
    return AgentRouter(backends)


def _build_engine(graph_path: str, encoder_spec: str, scripted: Optional[str],
                  lam: float, templates_dir: Optional[str] = None,
                  ) -> DiagnosticEngine:
    graph = graph_store.load_file(graph_path)
    encoder = make_encoder(encoder_spec, graph.dimension)
    router = (AgentRouter.scripted(ScriptedBackend.from_file(scripted))
              if scripted else _router_from_env())
    config = EngineConfig(retrieval=RetrievalConfig(lam=lam))
    deterministic = scripted is not None
    return DiagnosticEngine(
        graph, TemplateRegistry.with_overrides(templates_dir), router, encoder,
        config=config,
        id_factory=sequential_ids() if deterministic else None,
        clock=counting_clock() if deterministic else None,
    )


@click.group()
def main():
    """Graph-RAG condition triage engine."""


@main.command()
@click.option("--csv", "csv_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--encoder", "encoder_spec", required=True,
              help="Encoder URL or test:<seed>.")
@click.option("--edge-threshold", type=float, default=0.8, show_default=True)
@click.option("--edge-top-k", type=int, default=None,
              help="Use top-k edge policy instead of the threshold policy.")
@click.option("--dimension", type=int, default=64, show_default=True,
              help="Embedding dimension (test encoder only; HTTP encoders "
                   "must match this).")
@click.option("--out", "out_path", required=True, type=click.Path())
def ingest(csv_path, encoder_spec, edge_threshold, edge_top_k, dimension, out_path):
    """Build a condition graph from a CSV dataset and persist it."""
    try:
        records = graph_store.read_records_csv(csv_path)
        if not records:
            raise EmptyRecordSet(f"{csv_path} contains no records")
        encoder = make_encoder(encoder_spec, dimension)
        if edge_top_k is not None:
            policy = EdgePolicy(mode="top_k", top_k=edge_top_k)
        else:
            policy = EdgePolicy(threshold=edge_threshold)
        graph = graph_store.ingest(records, encoder, policy)
        graph_store.save_file(graph, out_path)
    except EncoderUnavailable as exc:
        _fail(str(exc), EXIT_BACKEND)
    except (GraphTriageError, ValueError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    click.echo(f"conditions: {len(graph.nodes)}")
    click.echo(f"info nodes: {len(graph.info)}")
    click.echo(f"edges: {len(graph.edges)}")
    click.echo(f"wrote {out_path}")


def _print_candidates(session) -> None:
    click.echo("Stage-1 candidates:")
    for i, entry in enumerate(session.candidates.entries, start=1):
        name = session.candidate_names.get(entry.condition_id, entry.condition_id)
        click.echo(f"  {i}. {name} ({entry.via.value}, score {entry.score:.4f})")


@main.command()
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--text", required=True)
@click.option("--image", "image_path", type=click.Path(exists=True), default=None)
@click.option("--lambda", "lam", type=float, default=0.4, show_default=True)
@click.option("--encoder", "encoder_spec", default="test:0", show_default=True)
@click.option("--scripted", type=click.Path(exists=True), default=None,
              help="Scripted LM backend file (deterministic runs).")
@click.option("--templates-dir", type=click.Path(exists=True), default=None)
def query(graph_path, text, image_path, lam, encoder_spec, scripted, templates_dir):
    """Run one interactive terminal session against a persisted graph."""
    if not (0.0 <= lam <= 1.0):
        _fail(f"lambda must be in [0, 1], got {lam}", EXIT_VALIDATION)
    try:
        engine = _build_engine(graph_path, encoder_spec, scripted, lam,
                               templates_dir)
        session = engine.start(QueryInput(text=text, image_ref=image_path))
    except (EncoderUnavailable, BackendUnavailable) as exc:
        _fail(str(exc), EXIT_BACKEND)
    except (GraphTriageError, ValueError) as exc:
        _fail(str(exc), EXIT_VALIDATION)

    _print_candidates(session)
    responses = []
    if session.state == SessionState.AWAITING_ANSWERS:
        click.echo("Clarifying questions (empty answer = skip):")
        for question in session.questions:
            answer = click.prompt(f"  {question.id}: {question.text}",
                                  default="", show_default=False)
            if answer.strip():
                responses.append({"question_id": question.id, "text": answer})
            else:
                responses.append({"question_id": question.id, "skip": True})
    try:
        engine.submit_answers(session, responses)
    except (EncoderUnavailable, BackendUnavailable) as exc:
        _fail(str(exc), EXIT_BACKEND)

    if session.verdicts:
        click.echo("Likelihoods:")
        for verdict in session.verdicts:
            name = session.candidate_names.get(verdict.condition_id,
                                               verdict.condition_id)
            click.echo(f"  {name}: {verdict.likelihood * 100:.0f}%")
    click.echo("Answer:")
    click.echo(session.answer_text)
    while True:
        message = click.prompt("Follow-up (empty to finish)", default="",
                               show_default=False)
        if not message.strip():
            break
        engine.follow_up(session, message)
        click.echo(session.last_reply)


def _load_qa_items(path: str) -> List[dict]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            item = json.loads(line)
            if not item.get("question", "").strip():
                raise ValueError(f"line {line_no}: missing question")
            if not item.get("expected_keywords") and not item.get("expected_answer"):
                raise ValueError(f"line {line_no}: needs expected_keywords "
                                 f"or expected_answer")
            items.append(item)
    if not items:
        raise ValueError(f"{path} contains no QA items")
    return items


def _judge_keyword(answer: str, item: dict) -> bool:
    haystack = answer.lower()
    keywords = item.get("expected_keywords")
    if keywords:
        return all(k.lower() in haystack for k in keywords)
    return item["expected_answer"].lower() in haystack


def _judge_lm(router: AgentRouter, answer: str, item: dict) -> bool:
    expectation = item.get("expected_answer") or ", ".join(item["expected_keywords"])
    prompt = (f"Reference answer: {expectation}\n\nCandidate answer:\n{answer}\n\n"
              'Does the candidate answer convey the reference answer? Respond '
              'with a JSON object {"correct": true} or {"correct": false}.')
    raw = router.complete(AgentRole.REASONING, prompt).text
    try:
        return bool(json.loads(raw.strip()).get("correct", False))
    except json.JSONDecodeError:
        return '"correct": true' in raw or "'correct': true" in raw.lower()


def _run_eval(graph_path: str, encoder_spec: str, scripted: Optional[str],
              items: List[dict], lam: float, judge: str,
              ) -> Tuple[List[bool], List[str]]:
    """Drive one full session per QA item with all questions skipped."""
    engine = _build_engine(graph_path, encoder_spec, scripted, lam)
    results, answers = [], []
    for item in items:
        session = engine.start(
            QueryInput(text=item["question"], image_ref=item.get("image")))
        skips = [{"question_id": q.id, "skip": True} for q in session.questions]
        engine.submit_answers(session, skips)
        answer = session.answer_text
        if judge == "lm":
            correct = _judge_lm(engine.router, answer, item)
        else:
            correct = _judge_keyword(answer, item)
        results.append(correct)
        answers.append(answer)
    return results, answers


@main.command("eval")
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--qa", "qa_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--scripted", type=click.Path(exists=True), default=None)
@click.option("--encoder", "encoder_spec", default="test:0", show_default=True)
@click.option("--lambda", "lam", type=float, default=0.4, show_default=True)
@click.option("--judge", type=click.Choice(["keyword", "lm"]), default="keyword",
              show_default=True)
def eval_cmd(graph_path, qa_path, scripted, encoder_spec, lam, judge):
    """Run the QA fixture set through full sessions and report accuracy."""
    try:
        items = _load_qa_items(qa_path)
        results, _ = _run_eval(graph_path, encoder_spec, scripted, items, lam, judge)
    except (EncoderUnavailable, BackendUnavailable) as exc:
        _fail(str(exc), EXIT_BACKEND)
    except (GraphTriageError, ValueError, json.JSONDecodeError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    for i, (item, correct) in enumerate(zip(items, results), start=1):
        mark = "ok  " if correct else "MISS"
        click.echo(f"[{mark}] {i:3d}  {item['question'][:60]}")
    hits = sum(results)
    click.echo(f"accuracy: {hits}/{len(results)} ({hits / len(results):.4f})")


@main.command("sweep-lambda")
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--qa", "qa_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--values", default="0.2,0.4,0.5,0.7,0.9", show_default=True)
@click.option("--scripted", type=click.Path(exists=True), default=None)
@click.option("--encoder", "encoder_spec", default="test:0", show_default=True)
@click.option("--judge", type=click.Choice(["keyword", "lm"]), default="keyword",
              show_default=True)
def sweep_lambda(graph_path, qa_path, values, scripted, encoder_spec, judge):
    """Evaluate QA accuracy across lambda values; one table row per value."""
    try:
        lams = [float(v) for v in values.split(",") if v.strip()]
        if not lams:
            raise ValueError("no lambda values given")
        for lam in lams:
            if not (0.0 <= lam <= 1.0):
                raise ValueError(f"lambda {lam} outside [0, 1]")
        items = _load_qa_items(qa_path)
    except (ValueError, json.JSONDecodeError) as exc:
        _fail(str(exc), EXIT_VALIDATION)

    rows = []
    try:
        for lam in lams:
            results, _ = _run_eval(graph_path, encoder_spec, scripted, items,
                                   lam, judge)
            rows.append((lam, sum(results), len(results)))
    except (EncoderUnavailable, BackendUnavailable) as exc:
        _fail(str(exc), EXIT_BACKEND)
    except (GraphTriageError, ValueError) as exc:
        _fail(str(exc), EXIT_VALIDATION)

    click.echo("lambda  accuracy  correct/total")
    for lam, hits, total in rows:
        click.echo(f"{lam:<7.2f} {hits / total:<9.4f} {hits}/{total}")
    best = max(rows, key=lambda r: r[1])
    click.echo(f"best lambda: {best[0]} (accuracy {best[1] / best[2]:.4f})")


@main.command()
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--encoder", "encoder_spec", default=None,
              help="Overrides GRAPHTRIAGE_ENCODER_URL.")
@click.option("--scripted", type=click.Path(exists=True), default=None)
@click.option("--templates-dir", type=click.Path(exists=True), default=None)
@click.option("--sessions-dir", type=click.Path(), default=None)
def serve(graph_path, host, port, encoder_spec, scripted, templates_dir,
          sessions_dir):
    """Run the HTTP API (see service module for endpoint contracts)."""
    import os

    from .service import ApiConfig, serve as run_service

    os.environ["GRAPHTRIAGE_GRAPH"] = graph_path
    config = ApiConfig.from_env()
    config.host, config.port = host, port
    if encoder_spec:
        config.encoder_spec = encoder_spec
    if scripted:
        config.scripted_lm_path = scripted
    if templates_dir:
        config.templates_dir = templates_dir
    if sessions_dir:
        config.sessions_dir = sessions_dir
    run_service(config)


if __name__ == "__main__":
    main()
