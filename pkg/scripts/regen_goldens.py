"""Regenerate the committed golden files under tests/goldens/.

The goldens pin byte-exact outputs of the deterministic scripted flows:
  - session_transcript.json: persisted event log of one full library session
  - api_flow.json: raw HTTP response bodies of the start/answers/message/get flow
  - cli_query.txt: terminal output of one scripted interactive query

Regenerate only when an intentional format change invalidates them, then
review the diff: python3 scripts/regen_goldens.py
"""

from __future__ import annotations

import json
import os
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

ROOT = os.path.join(os.path.dirname(__file__), "..")
DATA = os.path.join(ROOT, "tests", "data")
GOLDENS = os.path.join(ROOT, "tests", "goldens")

ECZEMA_TEXT = "dry itchy inflamed cracked patches of irritated skin"
FOLLOW_UP = "Should I see a doctor about this?"


def build_graph_file(tmp_dir: str) -> str:
    from graphtriage.encoders import HashEncoderClient
    from graphtriage.graph import EdgePolicy, ingest, read_records_csv, save_file

    encoder = HashEncoderClient(seed=7, dimension=32)
    graph = ingest(read_records_csv(os.path.join(DATA, "conditions_10.csv")),
                   encoder, EdgePolicy(threshold=0.8))
    path = os.path.join(tmp_dir, "graph.bin")
    save_file(graph, path)
    return path


def session_answers(session):
    answers = []
    for i, question in enumerate(session.questions):
        if i == 1:
            answers.append({"question_id": question.id, "skip": True})
        else:
            answers.append({"question_id": question.id,
                            "text": "yes" if i == 0 else "no"})
    return answers


def regen_session_transcript(tmp_dir: str) -> None:
    from graphtriage.encoders import HashEncoderClient
    from graphtriage.graph import load_file
    from graphtriage.llm import AgentRouter, ScriptedBackend
    from graphtriage.prompts import TemplateRegistry
    from graphtriage.session import (
        DiagnosticEngine,
        SessionStore,
        counting_clock,
        sequential_ids,
    )
    from graphtriage.vectors import QueryInput

    graph = load_file(build_graph_file(tmp_dir))
    store_dir = os.path.join(tmp_dir, "sessions")
    engine = DiagnosticEngine(
        graph, TemplateRegistry(),
        AgentRouter.scripted(
            ScriptedBackend.from_file(os.path.join(DATA, "scripted_golden.json"))),
        HashEncoderClient(seed=7, dimension=32),
        store=SessionStore(store_dir),
        id_factory=sequential_ids(),
        clock=counting_clock(),
    )
    session = engine.start(QueryInput(text=ECZEMA_TEXT,
                                      image_ref="img/query/closeup.jpg"))
    engine.submit_answers(session, session_answers(session))
    engine.follow_up(session, FOLLOW_UP)
    src = os.path.join(store_dir, f"{session.id}.json")
    dst = os.path.join(GOLDENS, "session_transcript.json")
    with open(src, "rb") as fh:
        payload = fh.read()
    with open(dst, "wb") as fh:
        fh.write(payload)
    print(f"session_transcript.json: {len(payload)} bytes")


def regen_api_flow(tmp_dir: str) -> None:
    from fastapi.testclient import TestClient

    from graphtriage.service import ApiConfig, create_app

    config = ApiConfig(graph_path=build_graph_file(tmp_dir),
                       encoder_spec="test:7",
                       scripted_lm_path=os.path.join(DATA, "scripted_golden.json"),
                       deterministic_ids=True)
    client = TestClient(create_app(config))
    flow = {}
    started = client.post("/v1/sessions", json={"text": ECZEMA_TEXT})
    flow["start"] = started.text
    session_id = started.json()["session_id"]
    questions = started.json()["questions"]
    answers = {"answers": [
        {"question_id": questions[0]["id"], "text": "yes"},
        {"question_id": questions[1]["id"], "skip": True},
        {"question_id": questions[2]["id"], "text": "no"},
    ]}
    flow["answers"] = client.post(f"/v1/sessions/{session_id}/answers",
                                  json=answers).text
    flow["message"] = client.post(f"/v1/sessions/{session_id}/message",
                                  json={"text": FOLLOW_UP}).text
    flow["transcript"] = client.get(f"/v1/sessions/{session_id}").text
    path = os.path.join(GOLDENS, "api_flow.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(flow, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"api_flow.json: {os.path.getsize(path)} bytes")


def regen_cli_query(tmp_dir: str) -> None:
    from click.testing import CliRunner

    from graphtriage.cli import main

    result = CliRunner().invoke(main, [
        "query", "--graph", build_graph_file(tmp_dir), "--text", ECZEMA_TEXT,
        "--encoder", "test:7",
        "--scripted", os.path.join(DATA, "scripted_golden.json")],
        input="yes\n\nno\nShould I see a doctor about this?\n\n")
    assert result.exit_code == 0, result.output
    path = os.path.join(GOLDENS, "cli_query.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(result.output)
    print(f"cli_query.txt: {os.path.getsize(path)} bytes")


if __name__ == "__main__":
    os.makedirs(GOLDENS, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp_dir:
        regen_session_transcript(tmp_dir)
    with tempfile.TemporaryDirectory() as tmp_dir:
        regen_api_flow(tmp_dir)
    with tempfile.TemporaryDirectory() as tmp_dir:
        regen_cli_query(tmp_dir)
    print("goldens written")
