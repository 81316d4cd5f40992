"""Prompt templates and injection of retrieved graph content.

Templates are plain UTF-8 text with {name} placeholders (lowercase
identifiers in single braces; literal JSON braces pass through untouched).
Built-in defaults can be overridden per template id by files in a templates
directory, so deployments can tune wording without code changes. Rendering
is pure text substitution: deterministic, single-pass, and every injected
fragment comes from the graph, the user transcript, or the template itself.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

from .errors import EmptyCandidates, MissingPlaceholder, UnknownTemplate
from .graph import ConditionGraph, InfoCategory
from .llm import AgentRole

_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")


@dataclass
class PromptTemplate:
    id: str
    role: AgentRole
    body: str

    @property
    def required_placeholders(self) -> set:
        return set(_PLACEHOLDER_RE.findall(self.body))


@dataclass
class ConditionBundle:
    """Everything retrieved about one candidate that prompts may cite."""

    condition_id: str
    name: str
    definition: str
    symptoms: str
    treatments: str
    prevention: str
    score: float


QUESTION_TEMPLATE = """\
You are a triage assistant narrowing down which skin condition matches a patient.

Patient's description:
{user_query}

Candidate conditions, most similar first:
{condition_bundles}

Write exactly {question_count} short clarifying questions that best tell these \
conditions apart. Ask about symptoms, onset, body location, and triggers the \
patient can observe without equipment. Each question must be answerable with \
yes/no or a short phrase.

Respond with a JSON array of question strings and nothing else, for example:
["Is the affected area itchy?", "Did it appear after sun exposure?"]
"""

LIKELIHOOD_TEMPLATE = """\
You are a careful clinical reasoning assistant. Estimate how likely it is that \
the patient described below has {condition_name}.

Condition information:
{condition_bundle}

Retrieval similarity for this condition: {score} (cosine scale, -1 to 1).

Patient's original description:
{user_query}

Clarifying questions and the patient's answers:
{qa_transcript}

Weigh each reported symptom against the condition's typical presentation, \
treating unanswered questions as missing evidence rather than negative \
evidence. Respond with a JSON object of the form {"likelihood": <number \
between 0 and 100>} and nothing else.
"""

ANSWER_TEMPLATE = """\
You are a medical information assistant. Using only the condition information \
below, explain to the patient what their symptoms most plausibly indicate.

Patient's description:
{user_query}

Clarifying questions and answers:
{qa_transcript}

Conditions considered: {condition_names}.

{condition_bundles}

For each condition listed, give one short paragraph explaining why it does or \
does not fit the reported symptoms, citing the symptom details above. Present \
the most likely condition first{low_confidence_note}. Close with practical \
next steps drawn from the treatment and prevention information, and remind \
the patient this is informational guidance, not a diagnosis.
"""

NO_MATCH_TEMPLATE = """\
You are a medical information assistant. The patient's description did not \
match any condition with enough confidence.

Patient's description:
{user_query}

Clarifying questions and answers:
{qa_transcript}

Tell the patient that no condition in the knowledge base matched well enough \
to be useful, and ask them for more detail: where the problem appears, how \
long it has been present, how it feels (itch, pain, heat), and anything that \
makes it better or worse. Encourage a clear, close-up photo if they can \
provide one. Keep the tone calm and practical.
"""

FOLLOW_UP_TEMPLATE = """\
You are continuing a conversation with a patient about their possible skin \
conditions. Answer using only the condition information and the conversation \
below.

Conditions under discussion:
{condition_bundles}

Conversation so far:
{transcript}

Patient's new message:
{message}

Answer the new message directly and specifically. When the information needed \
is not in the condition details above, say so plainly and suggest what a \
clinician could clarify. Keep the answer under two short paragraphs.
"""

DEFAULT_TEMPLATES: Dict[str, PromptTemplate] = {
    t.id: t for t in [
        PromptTemplate("question_generation", AgentRole.QUESTION, QUESTION_TEMPLATE),
        PromptTemplate("likelihood", AgentRole.REASONING, LIKELIHOOD_TEMPLATE),
        PromptTemplate("answer", AgentRole.INTERACTION, ANSWER_TEMPLATE),
        PromptTemplate("no_match", AgentRole.INTERACTION, NO_MATCH_TEMPLATE),
        PromptTemplate("follow_up", AgentRole.INTERACTION, FOLLOW_UP_TEMPLATE),
    ]
}


class TemplateRegistry:
    """Immutable-after-load registry of prompt templates."""

    def __init__(self, templates: Optional[Dict[str, PromptTemplate]] = None):
        self._templates = dict(templates or DEFAULT_TEMPLATES)

    @classmethod
    def with_overrides(cls, directory: Optional[str]) -> "TemplateRegistry":
        """Defaults, with bodies overridden by <id>.txt files in directory."""
        registry = dict(DEFAULT_TEMPLATES)
        if directory:
            for entry in sorted(os.listdir(directory)):
                if not entry.endswith(".txt"):
                    continue
                template_id = entry[:-4]
                if template_id not in registry:
                    raise UnknownTemplate(
                        f"template file {entry!r} does not match any of "
                        f"{sorted(registry)}")
                with open(os.path.join(directory, entry), encoding="utf-8") as fh:
                    body = fh.read()
                registry[template_id] = PromptTemplate(
                    template_id, registry[template_id].role, body)
        return cls(registry)

    def get(self, template_id: str) -> PromptTemplate:
        template = self._templates.get(template_id)
        if template is None:
            raise UnknownTemplate(template_id)
        return template

    def render(self, template_id: str, bindings: Mapping[str, str]) -> str:
        """Single-pass placeholder substitution; unbound placeholders raise."""
        template = self.get(template_id)
        missing = template.required_placeholders - set(bindings)
        if missing:
            raise MissingPlaceholder(
                f"template {template_id!r} missing bindings {sorted(missing)}")

        def substitute(match: re.Match) -> str:
            return str(bindings[match.group(1)])

        return _PLACEHOLDER_RE.sub(substitute, template.body)


def build_bundles(graph: ConditionGraph, entries) -> List[ConditionBundle]:
    """Bundle graph text for scored candidates, ordered score desc then id asc."""
    ordered = sorted(entries, key=lambda e: (-e.score, e.condition_id))
    bundles = []
    for entry in ordered:
        node = graph.nodes[entry.condition_id]
        children = graph.info_children(entry.condition_id)
        bundles.append(ConditionBundle(
            condition_id=node.id,
            name=node.name,
            definition=node.definition,
            symptoms=children[InfoCategory.SYMPTOMS].body,
            treatments=children[InfoCategory.TREATMENTS].body,
            prevention=children[InfoCategory.PREVENTION].body,
            score=entry.score,
        ))
    return bundles


def format_bundle(bundle: ConditionBundle) -> str:
    return (f"### {bundle.name} (similarity {bundle.score:.3f})\n"
            f"Definition: {bundle.definition}\n"
            f"Symptoms: {bundle.symptoms}\n"
            f"Treatments: {bundle.treatments}\n"
            f"Prevention: {bundle.prevention}")


def format_bundles(bundles: Sequence[ConditionBundle]) -> str:
    return "\n\n".join(format_bundle(b) for b in bundles)


def format_qa_transcript(questions, responses) -> str:
    """Question/answer pairs, with skips shown as explicit missing evidence."""
    if not questions:
        return "(no clarifying questions were asked)"
    answers = {r.question_id: r for r in responses}
    lines = []
    for i, question in enumerate(questions, start=1):
        response = answers.get(question.id)
        if response is None or response.skipped:
            answer = "(no answer given)"
        else:
            answer = response.text
        lines.append(f"Q{i}: {question.text}")
        lines.append(f"A{i}: {answer}")
    return "\n".join(lines)


def build_question_prompt(registry: TemplateRegistry,
                          bundles: Sequence[ConditionBundle],
                          user_query: str, question_count: int) -> str:
    if not bundles:
        raise EmptyCandidates("cannot ask questions about zero candidates")
    return registry.render("question_generation", {
        "user_query": user_query,
        "condition_bundles": format_bundles(bundles),
        "question_count": str(question_count),
    })


def build_likelihood_prompt(registry: TemplateRegistry, bundle: ConditionBundle,
                            user_query: str, qa_transcript: str) -> str:
    return registry.render("likelihood", {
        "condition_name": bundle.name,
        "condition_bundle": format_bundle(bundle),
        "score": f"{bundle.score:.3f}",
        "user_query": user_query,
        "qa_transcript": qa_transcript,
    })


def build_answer_prompt(registry: TemplateRegistry,
                        bundles: Sequence[ConditionBundle], user_query: str,
                        qa_transcript: str, low_confidence: bool = False) -> str:
    """Final-answer prompt; with no bundles, falls back to asking for detail."""
    if not bundles:
        return registry.render("no_match", {
            "user_query": user_query,
            "qa_transcript": qa_transcript,
        })
    note = (", and note that confidence is low because no condition cleared "
            "the likelihood threshold") if low_confidence else ""
    return registry.render("answer", {
        "user_query": user_query,
        "qa_transcript": qa_transcript,
        "condition_names": ", ".join(b.name for b in bundles),
        "condition_bundles": format_bundles(bundles),
        "low_confidence_note": note,
    })


def build_follow_up_prompt(registry: TemplateRegistry,
                           bundles: Sequence[ConditionBundle],
                           transcript: str, message: str) -> str:
    return registry.render("follow_up", {
        "condition_bundles": format_bundles(bundles) if bundles
        else "(no conditions matched)",
        "transcript": transcript,
        "message": message,
    })
