"""Language-model clients for the three agent roles.

Roles are the contract: the question agent writes clarifying questions, the
reasoning agent estimates per-condition likelihoods (temperature pinned to 0
so its JSON output parses deterministically), and the interaction agent
writes user-facing answers. Backends are configuration: an OpenAI-style
chat-completion HTTP endpoint per role, or a scripted test double that maps
prompt matchers to canned responses and fails closed on anything unmatched.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import re
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol

import httpx

from .errors import (
    BackendUnavailable,
    ContextOverflow,
    ScriptExhausted,
    UnparseableLikelihood,
)

logger = logging.getLogger(__name__)


class AgentRole(enum.Enum):
    QUESTION = "question"
    REASONING = "reasoning"
    INTERACTION = "interaction"


@dataclass
class LmRequest:
    role: AgentRole
    prompt: str
    max_tokens: int = 1024
    temperature: float = 0.2

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")


@dataclass
class LmResponse:
    text: str
    latency: float
    backend_id: str


class LmBackend(Protocol):
    def complete(self, request: LmRequest) -> LmResponse: ...


@dataclass
class ScriptRule:
    """One scripted rule: fires when the role matches (or is unset) and the
    prompt contains the substring. `once` rules are consumed on first use."""

    contains: str
    response: str
    role: Optional[AgentRole] = None
    once: bool = False
    used: bool = field(default=False, compare=False)


class ScriptedBackend:
    """Deterministic test double: first matching rule wins, unmatched raises.

    Never improvises: a prompt no rule covers raises ScriptExhausted so test
    flows fail loudly instead of drifting.
    """

    def __init__(self, rules: List[ScriptRule]):
        self._rules = list(rules)
        self.requests: List[LmRequest] = []  # capture for containment assertions

    @classmethod
    def from_file(cls, path: str) -> "ScriptedBackend":
        """Load rules from a JSON list of {contains, response, role?, once?}."""
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        rules = [
            ScriptRule(
                contains=entry["contains"],
                response=entry["response"],
                role=AgentRole(entry["role"]) if entry.get("role") else None,
                once=bool(entry.get("once", False)),
            )
            for entry in raw
        ]
        return cls(rules)

    def ping(self) -> bool:
        return True

    def complete(self, request: LmRequest) -> LmResponse:
        self.requests.append(request)
        for rule in self._rules:
            if rule.once and rule.used:
                continue
            if rule.role is not None and rule.role is not request.role:
                continue
            if rule.contains in request.prompt:
                rule.used = True
                return LmResponse(text=rule.response, latency=0.0, backend_id="scripted")
        raise ScriptExhausted(
            f"no scripted rule matches {request.role.value} prompt "
            f"starting {request.prompt[:80]!r}")


class HttpChatBackend:
    """OpenAI-style chat-completion client for one backend endpoint.

    POSTs {base_url}/v1/chat/completions with {model, messages, max_tokens,
    temperature} and returns choices[0].message.content. Transient transport
    failures and 5xx responses are retried twice with exponential backoff;
    parse failures are never retried here (that is the caller's concern).
    """

    def __init__(self, base_url: str, model: str, api_key: Optional[str] = None,
                 timeout: float = 60.0, retries: int = 2, backoff: float = 0.25,
                 context_limit_chars: int = 48000,
                 transport: Optional[httpx.BaseTransport] = None):
        self._base_url = base_url.rstrip("/")
        self._model = model
        self._context_limit = context_limit_chars
        self._retries = retries
        self._backoff = backoff
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers,
                                    transport=transport)

    @property
    def backend_id(self) -> str:
        return f"{self._base_url}#{self._model}"

    def ping(self) -> bool:
        """Cheap liveness probe against the conventional /v1/models route."""
        try:
            return self._client.get(f"{self._base_url}/v1/models").status_code < 500
        except httpx.TransportError:
            return False

    def complete(self, request: LmRequest) -> LmResponse:
        if len(request.prompt) > self._context_limit:
            raise ContextOverflow(
                f"prompt is {len(request.prompt)} chars, "
                f"limit {self._context_limit}")
        payload = {
            "model": self._model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        start = time.monotonic()
        last_error: Exception | None = None
        for attempt in range(self._retries + 1):
            if attempt:
                time.sleep(self._backoff * (2 ** (attempt - 1)))
            try:
                resp = self._client.post(f"{self._base_url}/v1/chat/completions",
                                         json=payload)
                if resp.status_code >= 500:
                    last_error = BackendUnavailable(
                        f"backend returned {resp.status_code}",
                        backend=request.role.value)
                    continue
                resp.raise_for_status()
                text = resp.json()["choices"][0]["message"]["content"]
                return LmResponse(text=text, latency=time.monotonic() - start,
                                  backend_id=self.backend_id)
            except (httpx.TransportError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
        raise BackendUnavailable(
            f"{request.role.value} backend unreachable after "
            f"{self._retries + 1} attempts: {last_error}",
            backend=request.role.value) from last_error


class AgentRouter:
    """Binds each agent role to one backend and pins decode parameters.

    The reasoning role always runs at temperature 0 so likelihood JSON is
    reproducible; other roles use the configured default temperature.
    """

    def __init__(self, backends: Dict[AgentRole, LmBackend],
                 default_temperature: float = 0.2, max_tokens: int = 1024):
        missing = [r for r in AgentRole if r not in backends]
        if missing:
            raise ValueError(f"no backend bound for roles {missing}")
        self._backends = dict(backends)
        self._temperature = default_temperature
        self._max_tokens = max_tokens

    @classmethod
    def scripted(cls, backend: ScriptedBackend) -> "AgentRouter":
        return cls({role: backend for role in AgentRole})

    def ping(self) -> bool:
        distinct = {id(b): b for b in self._backends.values()}
        return all(getattr(b, "ping", lambda: True)() for b in distinct.values())

    def complete(self, role: AgentRole, prompt: str) -> LmResponse:
        temperature = 0.0 if role is AgentRole.REASONING else self._temperature
        request = LmRequest(role=role, prompt=prompt,
                            max_tokens=self._max_tokens, temperature=temperature)
        return self._backends[role].complete(request)


_LIKELIHOOD_RE = re.compile(
    r'"likelihood"\s*:\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)')


def parse_likelihood(raw: str) -> float:
    """Extract a likelihood from reasoning-agent output, normalized to [0, 1].

    Accepts a JSON object with a numeric "likelihood" field (possibly
    embedded in surrounding prose). Values in (1, 100] are read as
    percentages; anything outside [0, 100] or non-numeric raises
    UnparseableLikelihood.
    """
    value: Optional[float] = None
    try:
        parsed = json.loads(raw.strip())
        if isinstance(parsed, dict) and isinstance(parsed.get("likelihood"), (int, float)) \
                and not isinstance(parsed.get("likelihood"), bool):
            value = float(parsed["likelihood"])
    except (json.JSONDecodeError, ValueError):
        pass
    if value is None:
        match = _LIKELIHOOD_RE.search(raw)
        if match:
            value = float(match.group(1))
    if value is None or not math.isfinite(value):
        raise UnparseableLikelihood(f"no likelihood found in {raw[:120]!r}")
    if value < 0.0 or value > 100.0:
        raise UnparseableLikelihood(f"likelihood {value} outside [0, 100]")
    if value > 1.0:
        value /= 100.0
    return value
