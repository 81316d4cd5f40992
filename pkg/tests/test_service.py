"""HTTP API tests over the fixture graph with scripted backends."""

import json

import pytest
from fastapi.testclient import TestClient

from graphtriage.graph import save_file
from graphtriage.service import ApiConfig, create_app

from .conftest import data_path

ECZEMA_TEXT = "dry itchy inflamed cracked patches of irritated skin"


@pytest.fixture()
def api(fixture_graph, tmp_path):
    graph_path = tmp_path / "graph.bin"
    save_file(fixture_graph, str(graph_path))
    config = ApiConfig(
        graph_path=str(graph_path),
        encoder_spec="test:7",
        scripted_lm_path=data_path("scripted_golden.json"),
        sessions_dir=str(tmp_path / "sessions"),
        deterministic_ids=True,
    )
    app = create_app(config)
    return TestClient(app, raise_server_exceptions=False)


def _start(client, text=ECZEMA_TEXT, image=None):
    body = {"text": text}
    if image:
        body["image_base64"] = image
    response = client.post("/v1/sessions", json=body)
    assert response.status_code == 201, response.text
    return response.json()


def _answers_payload(questions, skip_all=False):
    return {"answers": [
        {"question_id": q["id"], "skip": True} if skip_all or i == 2
        else {"question_id": q["id"], "text": "yes"}
        for i, q in enumerate(questions)]}


def test_health_reports_fixture_counts(api):
    body = api.get("/v1/health").json()
    assert body == {"status": "ok", "graph_nodes": 10,
                    "encoder_ok": True, "lm_ok": True}


def test_condition_listing(api):
    body = api.get("/v1/graph/conditions").json()
    assert body["count"] == 10
    eczema = next(c for c in body["conditions"] if c["id"] == "eczema")
    assert eczema["name"] == "Eczema"
    assert eczema["neighbor_count"] == 1


def test_full_flow_over_http(api):
    started = _start(api)
    assert started["session_id"] == "s-000001"
    assert started["state"] == "awaiting_answers"
    assert len(started["questions"]) == 3
    assert started["candidates"][0]["id"] == "eczema"
    assert started["candidates"][0]["via"] == "direct"

    answered = api.post(f"/v1/sessions/{started['session_id']}/answers",
                        json=_answers_payload(started["questions"]))
    assert answered.status_code == 200
    body = answered.json()
    assert body["state"] == "answered"
    assert body["answer_text"].startswith("Your description points")
    assert body["verdicts"][0]["likelihood"] == 0.85
    assert "rationale" in body["verdicts"][0]

    reply = api.post(f"/v1/sessions/{started['session_id']}/message",
                     json={"text": "should I see someone?"})
    assert reply.status_code == 200
    assert reply.json()["reply_text"].startswith("Keep the skin")


def test_transcript_endpoint_redacts_prompts(api):
    started = _start(api)
    api.post(f"/v1/sessions/{started['session_id']}/answers",
             json=_answers_payload(started["questions"]))
    body = api.get(f"/v1/sessions/{started['session_id']}").json()
    assert body["state"] == "answered"
    exchanges = [e for e in body["transcript"] if e["type"] == "lm_exchange"]
    assert exchanges
    assert all("prompt" not in e["data"] for e in exchanges)
    assert all("response" in e["data"] for e in exchanges)


def test_debug_flag_exposes_prompts(fixture_graph, tmp_path):
    graph_path = tmp_path / "graph.bin"
    save_file(fixture_graph, str(graph_path))
    config = ApiConfig(graph_path=str(graph_path), encoder_spec="test:7",
                       scripted_lm_path=data_path("scripted_golden.json"),
                       deterministic_ids=True, debug_transcripts=True)
    client = TestClient(create_app(config))
    started = _start(client)
    body = client.get(f"/v1/sessions/{started['session_id']}").json()
    exchanges = [e for e in body["transcript"] if e["type"] == "lm_exchange"]
    assert all("prompt" in e["data"] for e in exchanges)


def test_validation_errors_are_400(api):
    assert api.post("/v1/sessions", json={"text": "  "}).status_code == 400
    started = _start(api)
    bad = api.post(f"/v1/sessions/{started['session_id']}/answers",
                   json={"answers": [{"question_id": "zz", "text": "x"}]})
    assert bad.status_code == 400
    assert bad.json()["error"]["code"] == "validation"


def test_unknown_session_is_404(api):
    assert api.get("/v1/sessions/nope").status_code == 404
    assert api.post("/v1/sessions/nope/answers",
                    json={"answers": []}).status_code == 404


def test_double_submit_is_409_never_reprocessed(api):
    started = _start(api)
    payload = _answers_payload(started["questions"])
    url = f"/v1/sessions/{started['session_id']}/answers"
    first = api.post(url, json=payload)
    assert first.status_code == 200
    second = api.post(url, json=payload)
    assert second.status_code == 409
    assert second.json()["error"]["code"] == "wrong_state"
    # the transcript shows exactly one stage2_completed event
    transcript = api.get(f"/v1/sessions/{started['session_id']}").json()
    stage2_events = [e for e in transcript["transcript"]
                     if e["type"] == "stage2_completed"]
    assert len(stage2_events) == 1


def test_message_before_answers_is_409(api):
    started = _start(api)
    response = api.post(f"/v1/sessions/{started['session_id']}/message",
                        json={"text": "hello?"})
    assert response.status_code == 409


def test_unmatched_script_surfaces_502(fixture_graph, tmp_path):
    graph_path = tmp_path / "graph.bin"
    save_file(fixture_graph, str(graph_path))
    script = tmp_path / "script.json"
    script.write_text(json.dumps([
        {"role": "question", "contains": "no such marker", "response": "[]"}]))
    config = ApiConfig(graph_path=str(graph_path), encoder_spec="test:7",
                       scripted_lm_path=str(script), deterministic_ids=True)
    client = TestClient(create_app(config), raise_server_exceptions=False)
    response = client.post("/v1/sessions", json={"text": ECZEMA_TEXT})
    assert response.status_code == 502
    assert response.json()["error"]["backend"] == "lm"


def test_bearer_token_hook(fixture_graph, tmp_path):
    graph_path = tmp_path / "graph.bin"
    save_file(fixture_graph, str(graph_path))
    config = ApiConfig(graph_path=str(graph_path), encoder_spec="test:7",
                       scripted_lm_path=data_path("scripted_golden.json"),
                       api_token="sekrit", deterministic_ids=True)
    client = TestClient(create_app(config))
    denied = client.post("/v1/sessions", json={"text": ECZEMA_TEXT})
    assert denied.status_code == 401
    ok = client.post("/v1/sessions", json={"text": ECZEMA_TEXT},
                     headers={"Authorization": "Bearer sekrit"})
    assert ok.status_code == 201


def test_session_resume_from_store(fixture_graph, tmp_path):
    graph_path = tmp_path / "graph.bin"
    save_file(fixture_graph, str(graph_path))
    sessions_dir = tmp_path / "sessions"
    config = ApiConfig(graph_path=str(graph_path), encoder_spec="test:7",
                       scripted_lm_path=data_path("scripted_golden.json"),
                       sessions_dir=str(sessions_dir), deterministic_ids=True)
    client = TestClient(create_app(config))
    started = _start(client)
    client.post(f"/v1/sessions/{started['session_id']}/answers",
                json=_answers_payload(started["questions"]))

    # a new app instance (service restart) serves the same session from disk
    restarted = TestClient(create_app(config))
    body = restarted.get(f"/v1/sessions/{started['session_id']}").json()
    assert body["state"] == "answered"
    reply = restarted.post(f"/v1/sessions/{started['session_id']}/message",
                           json={"text": "still here?"})
    assert reply.status_code == 200
