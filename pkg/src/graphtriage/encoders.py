"""Encoder clients: the seam to the external embedding service.

The production client talks HTTP to an inference service exposing POST
/encode. The hash encoder is a fully deterministic offline stand-in used by
tests and fixtures: tokens are hashed into stable pseudo-random unit vectors,
so identical inputs always produce identical embeddings on every platform.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import os
import re
import time
from typing import Optional, Protocol

import httpx
import numpy as np

from .errors import EncoderUnavailable
from .vectors import HybridEncoding, QueryInput, as_vector, normalize

logger = logging.getLogger(__name__)

ENCODER_URL_ENV = "GRAPHTRIAGE_ENCODER_URL"

_B64_PREFIX = "b64:"
_TOKEN_RE = re.compile(r"[a-z0-9]+")


class EncoderClient(Protocol):
    """Deterministic text / image+text encoder producing unit-norm vectors."""

    def encode_text(self, text: str) -> np.ndarray: ...

    def encode_multimodal(self, text: str, image_ref: str) -> np.ndarray: ...

    def dimension(self) -> int: ...


class HashEncoderClient:
    """Offline test encoder: hash tokens into the vector space, then normalize.

    Each token maps to a unit gaussian vector seeded from sha256(seed:token),
    via the frozen legacy RandomState generator, so outputs are reproducible
    across runs, processes and platforms. Token vectors are memoized; the
    cache is append-only with deterministic values, so concurrent readers
    need no lock.
    """

    def __init__(self, seed: int, dimension: int):
        if dimension < 2:
            raise ValueError("dimension must be >= 2")
        self._seed = int(seed)
        self._dim = int(dimension)
        self._token_cache: dict[str, np.ndarray] = {}

    def dimension(self) -> int:
        return self._dim

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            digest = hashlib.sha256(f"{self._seed}:{token}".encode("utf-8")).digest()
            rs = np.random.RandomState(int.from_bytes(digest[:4], "big"))
            vec = rs.standard_normal(self._dim)
            self._token_cache[token] = vec
        return vec

    def _sum_text_tokens(self, text: str) -> Optional[np.ndarray]:
        tokens = _TOKEN_RE.findall(text.lower())
        if not tokens:
            return None
        acc = np.zeros(self._dim, dtype=np.float64)
        for tok in tokens:
            acc += self._token_vector(tok)
        return acc

    def encode_text(self, text: str) -> np.ndarray:
        acc = self._sum_text_tokens(text)
        if acc is None:
            acc = self._token_vector("\x00empty")
        return normalize(acc)

    def encode_multimodal(self, text: str, image_ref: str) -> np.ndarray:
        acc = self._sum_text_tokens(text)
        image_vec = self._token_vector(f"\x00image:{image_ref}")
        if acc is None:
            return normalize(image_vec)
        return normalize(acc + image_vec)


class HttpEncoderClient:
    """HTTP client for a remote encoder service.

    Protocol: POST {base_url}/encode with JSON {"text": str, "image_base64"?: str},
    response {"vector": [float, ...]}. Image refs prefixed "b64:" are sent
    inline; anything else is treated as a local path and read from disk.
    Transient failures are retried twice with exponential backoff.
    """

    def __init__(self, base_url: str, dimension: int, timeout: float = 30.0,
                 retries: int = 2, backoff: float = 0.25,
                 transport: Optional[httpx.BaseTransport] = None):
        self._base_url = base_url.rstrip("/")
        self._dim = int(dimension)
        self._retries = retries
        self._backoff = backoff
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def dimension(self) -> int:
        return self._dim

    def _resolve_image(self, image_ref: str) -> str:
        if image_ref.startswith(_B64_PREFIX):
            return image_ref[len(_B64_PREFIX):]
        try:
            with open(image_ref, "rb") as fh:
                return base64.b64encode(fh.read()).decode("ascii")
        except OSError as exc:
            raise EncoderUnavailable(f"cannot read image {image_ref!r}: {exc}") from exc

    def _post(self, payload: dict) -> np.ndarray:
        last_error: Exception | None = None
        for attempt in range(self._retries + 1):
            if attempt:
                time.sleep(self._backoff * (2 ** (attempt - 1)))
            try:
                resp = self._client.post(f"{self._base_url}/encode", json=payload)
                if resp.status_code >= 500:
                    last_error = EncoderUnavailable(
                        f"encoder returned {resp.status_code}")
                    continue
                resp.raise_for_status()
                vector = resp.json()["vector"]
                return as_vector(vector, self._dim)
            except (httpx.TransportError, KeyError, ValueError) as exc:
                last_error = exc
        raise EncoderUnavailable(f"encoder unreachable after {self._retries + 1} "
                                 f"attempts: {last_error}") from last_error

    def encode_text(self, text: str) -> np.ndarray:
        return self._post({"text": text})

    def encode_multimodal(self, text: str, image_ref: str) -> np.ndarray:
        return self._post({"text": text, "image_base64": self._resolve_image(image_ref)})


def make_encoder(spec: str, dimension: int,
                 transport: Optional[httpx.BaseTransport] = None) -> EncoderClient:
    """Build an encoder from a spec string: "test:<seed>" or an http(s) URL."""
    if spec.startswith("test:"):
        seed = int(spec.split(":", 1)[1])
        return HashEncoderClient(seed=seed, dimension=dimension)
    if spec.startswith("http://") or spec.startswith("https://"):
        return HttpEncoderClient(spec, dimension=dimension, transport=transport)
    raise ValueError(f"encoder spec must be 'test:<seed>' or an http(s) URL, got {spec!r}")


def encoder_from_env(dimension: int) -> EncoderClient:
    spec = os.environ.get(ENCODER_URL_ENV)
    if not spec:
        raise EncoderUnavailable(f"{ENCODER_URL_ENV} is not set")
    return make_encoder(spec, dimension)


def encode_query(encoder: EncoderClient, query: QueryInput) -> HybridEncoding:
    """Encode a query into its text-only and (if an image is given) joint vectors."""
    text_vec = encoder.encode_text(query.text)
    mm_vec = None
    if query.image_ref is not None:
        mm_vec = encoder.encode_multimodal(query.text, query.image_ref)
    return HybridEncoding(text_vec=text_vec, mm_vec=mm_vec, source_query=query)
