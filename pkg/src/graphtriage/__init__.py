"""Graph-RAG condition triage engine.

Hybrid text/multimodal similarity retrieval over a condition knowledge graph,
two-stage candidate filtering (embedding band pass, then LM-estimated
likelihoods driven by user answers), prompt-injected answer generation, and a
resumable interactive session loop.
"""

from .dialogue import ClarifyingQuestion, LikelihoodVerdict, UserResponse
from .encoders import HashEncoderClient, HttpEncoderClient, encode_query, make_encoder
from .graph import (
    ConditionGraph,
    ConditionNode,
    ConditionRecord,
    EdgePolicy,
    InfoCategory,
    InfoNode,
    SimilarityEdge,
    ingest,
    load,
    load_file,
    read_records_csv,
    save,
    save_file,
)
from .llm import AgentRole, AgentRouter, HttpChatBackend, ScriptedBackend, parse_likelihood
from .prompts import TemplateRegistry
from .retrieval import CandidateSet, RetrievalConfig, ScoredCondition, Via, score_all, stage1_filter
from .session import (
    DiagnosticEngine,
    EngineConfig,
    Session,
    SessionState,
    SessionStore,
    replay_session,
)
from .vectors import HybridEncoding, QueryInput, cosine, hybrid_score, mean_pool, normalize

__version__ = "0.1.0"
