"""Prompt template tests: rendering, containment, ordering, fallbacks."""

import pytest

from graphtriage.errors import EmptyCandidates, MissingPlaceholder, UnknownTemplate
from graphtriage.llm import AgentRole
from graphtriage.prompts import (
    _PLACEHOLDER_RE,
    PromptTemplate,
    TemplateRegistry,
    build_answer_prompt,
    build_bundles,
    build_likelihood_prompt,
    build_question_prompt,
    format_qa_transcript,
)
from graphtriage.retrieval import RetrievalConfig, stage1_filter
from graphtriage.encoders import encode_query
from graphtriage.vectors import QueryInput
from graphtriage.dialogue import ClarifyingQuestion, UserResponse


@pytest.fixture()
def registry():
    return TemplateRegistry()


@pytest.fixture()
def eczema_bundles(fixture_graph, encoder):
    query = encode_query(encoder, QueryInput(
        text="dry itchy inflamed cracked patches of irritated skin"))
    candidates = stage1_filter(fixture_graph, query, RetrievalConfig())
    return build_bundles(fixture_graph, candidates.entries)


def test_render_simple_substitution():
    registry = TemplateRegistry({"pair": PromptTemplate(
        "pair", AgentRole.QUESTION, "{a}-{b}")})
    assert registry.render("pair", {"a": "x", "b": "y"}) == "x-y"


def test_render_missing_placeholder():
    registry = TemplateRegistry({"pair": PromptTemplate(
        "pair", AgentRole.QUESTION, "{a}-{b}")})
    with pytest.raises(MissingPlaceholder):
        registry.render("pair", {"a": "x"})


def test_render_unknown_template(registry):
    with pytest.raises(UnknownTemplate):
        registry.render("nonexistent", {})


def test_render_is_single_pass():
    registry = TemplateRegistry({"t": PromptTemplate(
        "t", AgentRole.QUESTION, "value: {a}")})
    rendered = registry.render("t", {"a": "{b} stays literal"})
    assert rendered == "value: {b} stays literal"


def test_json_braces_survive_rendering(registry, eczema_bundles):
    prompt = build_likelihood_prompt(registry, eczema_bundles[0],
                                     "itchy", "Q1: x\nA1: y")
    assert '{"likelihood": <number between 0 and 100>}' in prompt


def test_question_prompt_contains_all_candidates(registry, eczema_bundles):
    assert len(eczema_bundles) >= 2
    prompt = build_question_prompt(registry, eczema_bundles, "my skin", 3)
    for bundle in eczema_bundles:
        assert bundle.name in prompt
        assert bundle.symptoms in prompt
    assert "my skin" in prompt
    assert not _PLACEHOLDER_RE.search(prompt.replace('{"likelihood"', ""))


def test_question_prompt_rejects_empty(registry):
    with pytest.raises(EmptyCandidates):
        build_question_prompt(registry, [], "query", 3)


def test_bundles_ordered_score_desc_then_id(fixture_graph, encoder):
    query = encode_query(encoder, QueryInput(text="raised red wheals"))
    candidates = stage1_filter(fixture_graph, query, RetrievalConfig())
    bundles = build_bundles(fixture_graph, candidates.entries)
    keys = [(-b.score, b.condition_id) for b in bundles]
    assert keys == sorted(keys)


def test_likelihood_prompt_embeds_three_decimal_score(registry, eczema_bundles):
    bundle = eczema_bundles[0]
    prompt = build_likelihood_prompt(registry, bundle, "query", "(none)")
    assert f"similarity for this condition: {bundle.score:.3f}" in prompt


def test_answer_prompt_lists_conditions_and_has_no_markers(registry,
                                                           eczema_bundles):
    prompt = build_answer_prompt(registry, eczema_bundles, "my query",
                                 "Q1: a\nA1: b")
    names = ", ".join(b.name for b in eczema_bundles)
    assert f"Conditions considered: {names}." in prompt
    leftover = [m.group(0) for m in _PLACEHOLDER_RE.finditer(prompt)]
    assert leftover == []


def test_answer_prompt_empty_falls_back_to_more_detail(registry):
    prompt = build_answer_prompt(registry, [], "my query", "(none)")
    assert "more detail" in prompt
    assert "did not" in prompt and "match" in prompt
    assert "my query" in prompt
    assert "Conditions considered" not in prompt


def test_answer_prompt_low_confidence_note(registry, eczema_bundles):
    flagged = build_answer_prompt(registry, eczema_bundles, "q", "t",
                                  low_confidence=True)
    plain = build_answer_prompt(registry, eczema_bundles, "q", "t")
    assert "confidence is low" in flagged
    assert "confidence is low" not in plain


def test_rendering_deterministic(registry, eczema_bundles):
    first = build_answer_prompt(registry, eczema_bundles, "q", "t")
    second = build_answer_prompt(registry, eczema_bundles, "q", "t")
    assert first == second


def test_qa_transcript_formats_skips():
    questions = [ClarifyingQuestion("q1", "Itchy?", ["a"]),
                 ClarifyingQuestion("q2", "Fever?", ["a"])]
    responses = [UserResponse("q1", "yes, a lot"),
                 UserResponse("q2", "", skipped=True)]
    text = format_qa_transcript(questions, responses)
    assert "Q1: Itchy?" in text and "A1: yes, a lot" in text
    assert "A2: (no answer given)" in text
    assert format_qa_transcript([], []) == "(no clarifying questions were asked)"


def test_template_overrides_from_directory(tmp_path):
    (tmp_path / "answer.txt").write_text("Custom answer for {user_query} "
                                         "{qa_transcript}{condition_names}"
                                         "{condition_bundles}{low_confidence_note}")
    registry = TemplateRegistry.with_overrides(str(tmp_path))
    assert registry.get("answer").body.startswith("Custom answer")
    assert registry.get("likelihood").body == TemplateRegistry().get(
        "likelihood").body


def test_template_overrides_reject_unknown_ids(tmp_path):
    (tmp_path / "mystery.txt").write_text("body")
    with pytest.raises(UnknownTemplate):
        TemplateRegistry.with_overrides(str(tmp_path))
