"""CLI tests: ingest/query/eval/sweep exit codes and deterministic output."""

import hashlib
import json
import os

import pytest
from click.testing import CliRunner

from graphtriage.cli import main
from graphtriage.graph import load_file

from .conftest import data_path

ECZEMA_TEXT = "dry itchy inflamed cracked patches of irritated skin"


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def graph_file(tmp_path, runner):
    out = tmp_path / "fixture.bin"
    result = runner.invoke(main, [
        "ingest", "--csv", data_path("conditions_10.csv"),
        "--encoder", "test:7", "--dimension", "32",
        "--edge-threshold", "0.8", "--out", str(out)])
    assert result.exit_code == 0, result.output
    return str(out)


def test_ingest_prints_counts_and_writes_graph(tmp_path, runner):
    out = tmp_path / "fifty.bin"
    result = runner.invoke(main, [
        "ingest", "--csv", data_path("conditions_50.csv"),
        "--encoder", "test:7", "--dimension", "32", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "conditions: 50" in result.output
    assert "info nodes: 150" in result.output
    graph = load_file(str(out))
    assert len(graph.nodes) == 50


def test_ingest_deterministic_rerun_same_checksum(tmp_path, runner):
    digests = []
    for name in ("a.bin", "b.bin"):
        out = tmp_path / name
        result = runner.invoke(main, [
            "ingest", "--csv", data_path("conditions_10.csv"),
            "--encoder", "test:7", "--dimension", "32", "--out", str(out)])
        assert result.exit_code == 0
        digests.append(hashlib.sha256(out.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_ingest_empty_csv_exits_2(tmp_path, runner):
    empty = tmp_path / "empty.csv"
    empty.write_text("name,definition,symptoms,clinical_treatment,"
                     "home_treatment,prevention,image_paths\n")
    result = runner.invoke(main, [
        "ingest", "--csv", str(empty), "--encoder", "test:7",
        "--out", str(tmp_path / "x.bin")])
    assert result.exit_code == 2


def test_ingest_encoder_failure_exits_3(tmp_path, runner):
    result = runner.invoke(main, [
        "ingest", "--csv", data_path("conditions_10.csv"),
        "--encoder", "http://127.0.0.1:9", "--dimension", "32",
        "--out", str(tmp_path / "x.bin")])
    assert result.exit_code == 3


def test_query_invalid_lambda_exits_2(graph_file, runner):
    result = runner.invoke(main, [
        "query", "--graph", graph_file, "--text", "itchy skin",
        "--lambda", "1.5", "--scripted", data_path("scripted_golden.json")])
    assert result.exit_code == 2


def test_query_scripted_interactive_flow(graph_file, runner):
    result = runner.invoke(main, [
        "query", "--graph", graph_file, "--text", ECZEMA_TEXT,
        "--encoder", "test:7",
        "--scripted", data_path("scripted_golden.json")],
        input="yes\n\nno\n\n")
    assert result.exit_code == 0, result.output
    assert "Stage-1 candidates:" in result.output
    assert "Eczema" in result.output
    assert "Likelihoods:" in result.output
    assert "Your description points most strongly to eczema" in result.output


def test_query_lambda_one_equals_text_only_ranking(graph_file, runner,
                                                   tmp_path):
    image = tmp_path / "q.jpg"
    image.write_bytes(b"fake image bytes")
    args = ["query", "--graph", graph_file, "--text", "scaly plaques",
            "--encoder", "test:7",
            "--scripted", data_path("scripted_golden.json")]
    with_image = runner.invoke(
        main, args + ["--image", str(image), "--lambda", "1.0"],
        input="\n\n\n\n")
    text_only = runner.invoke(main, args + ["--lambda", "0.4"],
                              input="\n\n\n\n")
    assert with_image.exit_code == 0 and text_only.exit_code == 0

    def listing(output):
        lines = output.splitlines()
        start = lines.index("Stage-1 candidates:")
        return [line for line in lines[start + 1:] if line.startswith("  ")]

    assert listing(with_image.output) == listing(text_only.output)


def test_eval_reports_deterministic_accuracy(graph_file, runner):
    result = runner.invoke(main, [
        "eval", "--graph", graph_file, "--qa", data_path("qa_30.jsonl"),
        "--encoder", "test:7", "--scripted", data_path("scripted_eval.json")])
    assert result.exit_code == 0, result.output
    assert "accuracy: 25/30 (0.8333)" in result.output
    assert result.output.count("[ok  ]") == 25
    assert result.output.count("[MISS]") == 5


def test_eval_mixed_three_item_fixture(graph_file, runner, tmp_path):
    qa = tmp_path / "qa3.jsonl"
    items = [
        {"question": "What are the main symptoms of Eczema?",
         "expected_keywords": ["eczema"]},
        {"question": "How should Contact Dermatitis be treated at home?",
         "expected_keywords": ["contact dermatitis"]},
        {"question": "What helps prevent Psoriasis from coming back?",
         "expected_keywords": ["definitely absent words"]},
    ]
    qa.write_text("\n".join(json.dumps(i) for i in items) + "\n")
    result = runner.invoke(main, [
        "eval", "--graph", graph_file, "--qa", str(qa),
        "--encoder", "test:7", "--scripted", data_path("scripted_eval.json")])
    assert result.exit_code == 0, result.output
    assert "accuracy: 2/3 (0.6667)" in result.output


def test_eval_rejects_bad_items(graph_file, runner, tmp_path):
    qa = tmp_path / "bad.jsonl"
    qa.write_text(json.dumps({"question": "x"}) + "\n")
    result = runner.invoke(main, [
        "eval", "--graph", graph_file, "--qa", str(qa),
        "--scripted", data_path("scripted_eval.json")])
    assert result.exit_code == 2
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    result = runner.invoke(main, [
        "eval", "--graph", graph_file, "--qa", str(empty),
        "--scripted", data_path("scripted_eval.json")])
    assert result.exit_code == 2


def test_eval_lm_judge(graph_file, runner, tmp_path):
    qa = tmp_path / "qa1.jsonl"
    qa.write_text(json.dumps({
        "question": "What are the main symptoms of Eczema?",
        "expected_answer": "standard guidance"}) + "\n")
    script = json.loads(
        open(data_path("scripted_eval.json"), encoding="utf-8").read())
    script.insert(0, {"role": "reasoning", "contains": "Reference answer:",
                      "response": '{"correct": true}'})
    judged = tmp_path / "script.json"
    judged.write_text(json.dumps(script))
    result = runner.invoke(main, [
        "eval", "--graph", graph_file, "--qa", str(qa), "--judge", "lm",
        "--encoder", "test:7", "--scripted", str(judged)])
    assert result.exit_code == 0, result.output
    assert "accuracy: 1/1" in result.output


@pytest.fixture()
def sweep_graph(tmp_path, runner):
    out = tmp_path / "sweep.bin"
    result = runner.invoke(main, [
        "ingest", "--csv", data_path("sweep", "conditions.csv"),
        "--encoder", "test:11", "--dimension", "1024",
        "--edge-threshold", "0.99", "--out", str(out)])
    assert result.exit_code == 0, result.output
    return str(out)


def test_sweep_emits_one_row_per_lambda(sweep_graph, runner):
    result = runner.invoke(main, [
        "sweep-lambda", "--graph", sweep_graph,
        "--qa", data_path("sweep", "qa.jsonl"),
        "--scripted", data_path("sweep", "script.json"),
        "--encoder", "test:11", "--values", "0.2,0.4,0.5"])
    assert result.exit_code == 0, result.output
    rows = [line for line in result.output.splitlines()
            if line[:3] in ("0.2", "0.4", "0.5")]
    assert len(rows) == 3


def test_sweep_out_of_range_lambda_exits_2(sweep_graph, runner):
    result = runner.invoke(main, [
        "sweep-lambda", "--graph", sweep_graph,
        "--qa", data_path("sweep", "qa.jsonl"),
        "--scripted", data_path("sweep", "script.json"),
        "--values", "0.2,1.4"])
    assert result.exit_code == 2


def test_sweep_finds_planted_optimum(sweep_graph, runner):
    result = runner.invoke(main, [
        "sweep-lambda", "--graph", sweep_graph,
        "--qa", data_path("sweep", "qa.jsonl"),
        "--scripted", data_path("sweep", "script.json"),
        "--encoder", "test:11"])
    assert result.exit_code == 0, result.output
    assert "best lambda: 0.4 (accuracy 1.0000)" in result.output
