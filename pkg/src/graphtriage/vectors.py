"""Embedding vector math: cosine similarity, mean pooling, hybrid scoring.

Embeddings are 1-D float32 numpy arrays, L2-normalized at the encoder
boundary (norm within 1e-6 of 1). Similarity math upcasts to float64 for
accumulation. float32 is the storage dtype so persisted graphs round-trip
bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateMean,
    DimensionMismatch,
    EmptySequence,
    InvalidLambda,
    ZeroVector,
)

NORM_TOLERANCE = 1e-6
_DEGENERATE_NORM = 1e-9


def as_vector(values, dimension: Optional[int] = None) -> np.ndarray:
    """Coerce values to a 1-D float32 embedding, validating shape and finiteness."""
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 1:
        raise DimensionMismatch(f"embedding must be 1-D, got shape {arr.shape}")
    if dimension is not None and arr.shape[0] != dimension:
        raise DimensionMismatch(f"expected dimension {dimension}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ZeroVector("embedding contains non-finite entries")
    return arr


def normalize(values) -> np.ndarray:
    """L2-normalize to a unit float32 vector (norm computed in float64)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"embedding must be 1-D, got shape {arr.shape}")
    norm = float(np.sqrt(np.dot(arr, arr)))
    if not np.isfinite(norm) or norm < _DEGENERATE_NORM:
        raise ZeroVector("cannot normalize a (near-)zero vector")
    return (arr / norm).astype(np.float32)


def is_normalized(vec: np.ndarray, tolerance: float = NORM_TOLERANCE) -> bool:
    arr = np.asarray(vec, dtype=np.float64)
    return abs(float(np.sqrt(np.dot(arr, arr))) - 1.0) <= tolerance


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity dot(a,b)/(|a||b|), computed in float64, clamped to [-1, 1].

    Raises DimensionMismatch on unequal dimensions and ZeroVector when either
    input has numerically zero norm.
    """
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.ndim != 1 or bv.ndim != 1 or av.shape[0] != bv.shape[0]:
        raise DimensionMismatch(f"cosine on shapes {av.shape} and {bv.shape}")
    na = float(np.sqrt(np.dot(av, av)))
    nb = float(np.sqrt(np.dot(bv, bv)))
    if na < _DEGENERATE_NORM or nb < _DEGENERATE_NORM:
        raise ZeroVector("cosine undefined for zero vectors")
    value = float(np.dot(av, bv)) / (na * nb)
    return min(1.0, max(-1.0, value))


def mean_pool(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Arithmetic mean of the vectors, re-normalized to unit L2 norm.

    Raises EmptySequence for zero inputs and DegenerateMean when the mean
    norm falls below 1e-9 (e.g. exactly opposing vectors).
    """
    vecs = list(vectors)
    if not vecs:
        raise EmptySequence("mean_pool requires at least one vector")
    dim = np.asarray(vecs[0]).shape[0]
    stacked = np.empty((len(vecs), dim), dtype=np.float64)
    for i, v in enumerate(vecs):
        arr = np.asarray(v, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != dim:
            raise DimensionMismatch("mean_pool inputs must share one dimension")
        stacked[i] = arr
    mean = stacked.mean(axis=0)
    norm = float(np.sqrt(np.dot(mean, mean)))
    if norm < _DEGENERATE_NORM:
        raise DegenerateMean(f"mean norm {norm:.3e} below 1e-9")
    return (mean / norm).astype(np.float32)


@dataclass
class QueryInput:
    """One user query: free-text description plus an optional opaque image reference.

    image_ref is resolved by the encoder client: a filesystem path / URI, or an
    inline payload prefixed with "b64:".
    """

    text: str
    image_ref: Optional[str] = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError("query text must be non-empty")


@dataclass
class HybridEncoding:
    """Encoded query: text-only vector plus optional joint image+text vector."""

    text_vec: np.ndarray
    mm_vec: Optional[np.ndarray] = None
    source_query: Optional[QueryInput] = None

    @property
    def dimension(self) -> int:
        return int(self.text_vec.shape[0])


def check_lambda(lam: float) -> float:
    lam = float(lam)
    if not (0.0 <= lam <= 1.0) or not np.isfinite(lam):
        raise InvalidLambda(f"lambda must be in [0, 1], got {lam}")
    return lam


def hybrid_score(query: HybridEncoding, node, lam: float) -> float:
    """Weighted hybrid similarity between a query encoding and one graph node.

    ``node`` is anything carrying ``text_embedding`` and ``mm_embedding``
    attributes. With both modalities present the score is the text/multimodal
    cosine blend, evaluated as ``lam * (s_text - s_mm) + s_mm`` with exact
    endpoint values (lam=1 returns the text cosine bit-exactly, lam=0 the
    multimodal cosine). Queries without an image fall back to the text cosine
    alone.
    """
    lam = check_lambda(lam)
    s_text = cosine(query.text_vec, node.text_embedding)
    if query.mm_vec is None:
        return s_text
    if lam == 1.0:
        return s_text
    s_mm = cosine(query.mm_vec, node.mm_embedding)
    if lam == 0.0:
        return s_mm
    return lam * (s_text - s_mm) + s_mm
