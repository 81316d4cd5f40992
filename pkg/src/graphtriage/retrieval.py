"""Stage-1 candidate retrieval: score every node, keep the adaptive top band,
union in graph neighbors.

The selection rule keeps every node scoring at least relative_threshold
(default 0.95) times the maximum hybrid score, then adds all graph neighbors
of the kept nodes. Neighbors carry their own hybrid scores so downstream
likelihood estimation sees meaningful priors. When the maximum score is not
positive the relative rule degenerates, so only the argmax nodes (ties
included) are kept.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from . import kernels
from .errors import EmptyGraph
from .graph import ConditionGraph
from .vectors import HybridEncoding, check_lambda

DEFAULT_LAMBDA = 0.4
DEFAULT_RELATIVE_THRESHOLD = 0.95


class Via(enum.Enum):
    DIRECT = "direct"
    NEIGHBOR = "neighbor"


@dataclass
class RetrievalConfig:
    lam: float = DEFAULT_LAMBDA
    relative_threshold: float = DEFAULT_RELATIVE_THRESHOLD
    max_candidates: Optional[int] = None

    def __post_init__(self):
        check_lambda(self.lam)
        if not (0.0 < self.relative_threshold <= 1.0):
            raise ValueError(f"relative_threshold must be in (0, 1], "
                             f"got {self.relative_threshold}")
        if self.max_candidates is not None and self.max_candidates < 1:
            raise ValueError("max_candidates must be positive")


@dataclass
class ScoredCondition:
    condition_id: str
    score: float
    via: Via


@dataclass
class CandidateSet:
    """Scored conditions surviving a filter stage.

    Stage-1 orders entries by score descending, direct matches before
    neighbors at equal score, id ascending as the final tiebreak. Stage-2
    reorders its filtered output by likelihood.
    """

    entries: List[ScoredCondition] = field(default_factory=list)
    query: Optional[HybridEncoding] = None

    @property
    def ids(self) -> List[str]:
        return [e.condition_id for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def score_all(graph: ConditionGraph, query: HybridEncoding,
              config: Optional[RetrievalConfig] = None) -> Dict[str, float]:
    """Hybrid score for every node, keyed by condition id.

    Uses the batched kernels (numba by default, numpy fallback via env flag).
    Queries without a multimodal vector score on text similarity alone.
    """
    config = config or RetrievalConfig()
    if not graph.nodes:
        raise EmptyGraph("cannot score an empty graph")
    ids, text_mat, mm_mat = graph.matrices()
    if query.mm_vec is None:
        scores = kernels.text_scores(text_mat, query.text_vec.astype("float64"))
    else:
        scores = kernels.hybrid_scores(text_mat, mm_mat,
                                       query.text_vec.astype("float64"),
                                       query.mm_vec.astype("float64"),
                                       config.lam)
    return {node_id: float(s) for node_id, s in zip(ids, scores)}


def stage1_filter(graph: ConditionGraph, query: HybridEncoding,
                  config: Optional[RetrievalConfig] = None) -> CandidateSet:
    """Embedding-based candidate selection with neighbor expansion.

    Every node with score >= relative_threshold * max (max > 0) is a direct
    match; all neighbors of direct matches join as neighbor expansions with
    their own scores. Direct matches take precedence when a node qualifies
    both ways. Entries are sorted (score desc, direct-before-neighbor, id asc)
    and optionally truncated to max_candidates.
    """
    config = config or RetrievalConfig()
    scores = score_all(graph, query, config)
    max_score = max(scores.values())

    if max_score > 0.0:
        direct = {node_id for node_id, s in scores.items()
                  if s >= config.relative_threshold * max_score}
    else:
        direct = {node_id for node_id, s in scores.items() if s == max_score}

    expanded = set()
    for node_id in direct:
        expanded.update(graph.adjacency.get(node_id, ()))
    expanded -= direct

    entries = [ScoredCondition(node_id, scores[node_id], Via.DIRECT)
               for node_id in direct]
    entries += [ScoredCondition(node_id, scores[node_id], Via.NEIGHBOR)
                for node_id in expanded]
    entries.sort(key=lambda e: (-e.score, e.via is not Via.DIRECT, e.condition_id))
    if config.max_candidates is not None:
        entries = entries[:config.max_candidates]
    return CandidateSet(entries=entries, query=query)
