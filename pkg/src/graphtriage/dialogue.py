"""Stage-2 response filtering: clarifying questions, likelihood estimation, pruning.

The question agent proposes a small batch of discriminative questions for the
Stage-1 candidates. After the user answers (or skips), the reasoning agent
estimates a likelihood per candidate from the condition's graph text, its
retrieval score, and the full Q&A transcript; candidates at or below the
threshold are pruned (strictly-greater-than semantics, so exactly 0.5 is
dropped at the default threshold). Both parsers grant the model one
corrective re-ask before failing closed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .errors import EmptyCandidates, UnparseableLikelihood, UnparseableQuestions
from .graph import ConditionGraph
from .llm import AgentRole, parse_likelihood
from .prompts import (
    TemplateRegistry,
    build_bundles,
    build_likelihood_prompt,
    build_question_prompt,
    format_qa_transcript,
)
from .retrieval import CandidateSet, ScoredCondition

DEFAULT_STAGE2_THRESHOLD = 0.5
DEFAULT_QUESTION_COUNT = 3
MAX_QUESTION_COUNT = 8

_QUESTIONS_REMINDER = ("\n\nReminder: respond with only a JSON array of "
                       "question strings. No prose, no numbering outside "
                       "the array.")
_LIKELIHOOD_REMINDER = ('\n\nReminder: respond with only a JSON object of '
                        'the form {"likelihood": <number between 0 and '
                        '100>}. No other text.')


@dataclass
class ClarifyingQuestion:
    id: str
    text: str
    origin_ids: List[str]


@dataclass
class UserResponse:
    question_id: str
    text: str
    skipped: bool = False
    timestamp: float = 0.0


@dataclass
class LikelihoodVerdict:
    condition_id: str
    likelihood: float
    rationale: str


def _parse_question_array(raw: str) -> Optional[List[str]]:
    candidates = [raw.strip()]
    start, end = raw.find("["), raw.rfind("]")
    if 0 <= start < end:
        candidates.append(raw[start:end + 1])
    for text in candidates:
        try:
            parsed = json.loads(text)
        except json.JSONDecodeError:
            continue
        if (isinstance(parsed, list) and parsed
                and all(isinstance(q, str) and q.strip() for q in parsed)):
            return [q.strip() for q in parsed]
    return None


def generate_questions(registry: TemplateRegistry, router, graph: ConditionGraph,
                       candidates: CandidateSet, user_query: str,
                       question_count: int = DEFAULT_QUESTION_COUNT,
                       ) -> List[ClarifyingQuestion]:
    """Ask the question agent for clarifying questions about the candidates.

    Retries once with a stricter format reminder when the response is not a
    JSON array of strings, then raises UnparseableQuestions. Responses longer
    than question_count are truncated.
    """
    if not candidates.entries:
        raise EmptyCandidates("no candidates to ask about")
    if not (1 <= question_count <= MAX_QUESTION_COUNT):
        raise ValueError(f"question_count must be in [1, {MAX_QUESTION_COUNT}]")
    bundles = build_bundles(graph, candidates.entries)
    prompt = build_question_prompt(registry, bundles, user_query, question_count)
    texts = _parse_question_array(router.complete(AgentRole.QUESTION, prompt).text)
    if texts is None:
        retry = router.complete(AgentRole.QUESTION, prompt + _QUESTIONS_REMINDER)
        texts = _parse_question_array(retry.text)
    if texts is None:
        raise UnparseableQuestions("question agent did not produce a JSON array")
    origin = candidates.ids
    return [ClarifyingQuestion(id=f"q{i}", text=text, origin_ids=list(origin))
            for i, text in enumerate(texts[:question_count], start=1)]


def _likelihood_with_retry(router, prompt: str) -> Tuple[float, str]:
    response = router.complete(AgentRole.REASONING, prompt)
    try:
        return parse_likelihood(response.text), response.text.strip()
    except UnparseableLikelihood:
        retry = router.complete(AgentRole.REASONING, prompt + _LIKELIHOOD_REMINDER)
        return parse_likelihood(retry.text), retry.text.strip()


def stage2_filter(registry: TemplateRegistry, router, graph: ConditionGraph,
                  candidates: CandidateSet,
                  questions: Sequence[ClarifyingQuestion],
                  responses: Sequence[UserResponse], user_query: str,
                  threshold: float = DEFAULT_STAGE2_THRESHOLD,
                  ) -> Tuple[CandidateSet, List[LikelihoodVerdict]]:
    """Likelihood-based pruning of the candidate set.

    One reasoning call per candidate, in deterministic candidate order. Keeps
    conditions with likelihood strictly greater than threshold; returns the
    kept set ordered by likelihood descending plus every verdict (kept and
    pruned) for transparency.
    """
    qa_transcript = format_qa_transcript(questions, responses)
    verdicts: List[LikelihoodVerdict] = []
    by_id = {}
    for entry in candidates.entries:
        bundle = build_bundles(graph, [entry])[0]
        prompt = build_likelihood_prompt(registry, bundle, user_query, qa_transcript)
        likelihood, rationale = _likelihood_with_retry(router, prompt)
        verdicts.append(LikelihoodVerdict(entry.condition_id, likelihood, rationale))
        by_id[entry.condition_id] = entry

    verdicts.sort(key=lambda v: (-v.likelihood, v.condition_id))
    kept_entries: List[ScoredCondition] = [
        by_id[v.condition_id] for v in verdicts if v.likelihood > threshold]
    filtered = CandidateSet(entries=kept_entries, query=candidates.query)
    return filtered, verdicts
