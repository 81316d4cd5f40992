"""Exception hierarchy shared across the package.

Every error raised by graphtriage derives from GraphTriageError so callers
(CLI, HTTP service) can map failures to exit codes / status codes in one place.
"""


class GraphTriageError(Exception):
    """Base class for all graphtriage errors."""


# --- vector math ---

class DimensionMismatch(GraphTriageError):
    pass


class ZeroVector(GraphTriageError):
    pass


class InvalidLambda(GraphTriageError):
    pass


class EmptySequence(GraphTriageError):
    pass


class DegenerateMean(GraphTriageError):
    """Mean of the pooled vectors is numerically zero and cannot be normalized."""


# --- graph store ---

class DuplicateConditionName(GraphTriageError):
    pass


class EmptyRecordSet(GraphTriageError):
    pass


class UnknownConditionId(GraphTriageError):
    pass


class SchemaVersionMismatch(GraphTriageError):
    pass


class CorruptPayload(GraphTriageError):
    """Persisted graph payload failed checksum or structural validation."""


class InvalidRecord(GraphTriageError):
    """Ingestion record violates a precondition (empty name/definition, bad CSV)."""


# --- retrieval ---

class EmptyGraph(GraphTriageError):
    pass


# --- encoder / LM transport ---

class EncoderUnavailable(GraphTriageError):
    pass


class BackendUnavailable(GraphTriageError):
    def __init__(self, message: str, backend: str = "lm"):
        super().__init__(message)
        self.backend = backend


class ContextOverflow(GraphTriageError):
    pass


class ScriptExhausted(GraphTriageError):
    """Scripted backend received a prompt no remaining rule matches."""


class UnparseableLikelihood(GraphTriageError):
    pass


class UnparseableQuestions(GraphTriageError):
    pass


# --- prompt templates ---

class MissingPlaceholder(GraphTriageError):
    pass


class UnknownTemplate(GraphTriageError):
    pass


class EmptyCandidates(GraphTriageError):
    pass


# --- session ---

class WrongState(GraphTriageError):
    pass


class UnknownSession(GraphTriageError):
    pass
