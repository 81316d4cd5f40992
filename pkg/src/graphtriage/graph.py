"""Condition knowledge graph: nodes, info children, similarity edges, persistence.

Each condition node carries a text embedding (of its definition) and a
multimodal embedding (re-normalized mean of its per-image encodings), plus
exactly three info children: symptoms, treatments, prevention. Undirected
inter-condition edges are created at ingest time from text-embedding cosine
similarity, per a configurable edge policy. The graph is immutable after
construction; rebuild rather than mutate.

Persistence is a single-file container: a JSON header (schema version,
dimension, node/info/edge tables in canonical order) followed by a
little-endian float32 embedding block, with a trailing CRC32 over everything
before it. Embeddings are stored and held in memory as float32, so
load(save(g)) reproduces g bit-exactly.
"""

from __future__ import annotations

import csv
import enum
import json
import re
import struct
import zlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .encoders import EncoderClient
from .errors import (
    CorruptPayload,
    DuplicateConditionName,
    EmptyRecordSet,
    InvalidRecord,
    SchemaVersionMismatch,
    UnknownConditionId,
)
from .vectors import cosine, is_normalized, mean_pool

SCHEMA_VERSION = 1

CSV_HEADER = ["name", "definition", "symptoms", "clinical_treatment",
              "home_treatment", "prevention", "image_paths"]

_EMPTY_BODY = "No information recorded."


class InfoCategory(enum.Enum):
    SYMPTOMS = "symptoms"
    TREATMENTS = "treatments"
    PREVENTION = "prevention"


@dataclass
class InfoNode:
    id: str
    category: InfoCategory
    body: str
    parent_id: str


@dataclass
class ConditionNode:
    id: str
    name: str
    definition: str
    text_embedding: np.ndarray
    mm_embedding: np.ndarray
    info_children: Tuple[str, str, str]


@dataclass
class SimilarityEdge:
    """Undirected edge, stored once with a < b; queried symmetrically."""

    a: str
    b: str
    weight: float


@dataclass
class ConditionRecord:
    """One row of the ingestion CSV."""

    name: str
    definition: str
    symptoms: str = ""
    clinical_treatment: str = ""
    home_treatment: str = ""
    prevention: str = ""
    image_paths: List[str] = field(default_factory=list)


@dataclass
class EdgePolicy:
    """How inter-condition edges are derived from text-embedding cosines.

    mode "threshold": connect pairs with cosine >= threshold (default 0.80).
    mode "top_k": connect each node to its top_k most text-similar peers.
    """

    mode: str = "threshold"
    threshold: float = 0.80
    top_k: int = 3

    def __post_init__(self):
        if self.mode not in ("threshold", "top_k"):
            raise ValueError(f"unknown edge policy mode {self.mode!r}")


@dataclass
class ConditionGraph:
    dimension: int
    nodes: Dict[str, ConditionNode]
    info: Dict[str, InfoNode]
    edges: List[SimilarityEdge]
    adjacency: Dict[str, Set[str]]
    _matrices: Optional[Tuple[List[str], np.ndarray, np.ndarray]] = field(
        default=None, repr=False, compare=False)

    @property
    def node_ids(self) -> List[str]:
        return sorted(self.nodes)

    def neighbors(self, condition_id: str) -> Set[str]:
        """All conditions adjacent to condition_id (never includes itself)."""
        if condition_id not in self.nodes:
            raise UnknownConditionId(condition_id)
        return set(self.adjacency.get(condition_id, ()))

    def info_children(self, condition_id: str) -> Dict[InfoCategory, InfoNode]:
        node = self.nodes.get(condition_id)
        if node is None:
            raise UnknownConditionId(condition_id)
        children = (self.info[i] for i in node.info_children)
        return {child.category: child for child in children}

    def matrices(self) -> Tuple[List[str], np.ndarray, np.ndarray]:
        """(node_ids, text_matrix, mm_matrix) with rows in sorted-id order."""
        if self._matrices is None:
            ids = self.node_ids
            text = np.stack([self.nodes[i].text_embedding for i in ids]) if ids \
                else np.zeros((0, self.dimension), dtype=np.float32)
            mm = np.stack([self.nodes[i].mm_embedding for i in ids]) if ids \
                else np.zeros((0, self.dimension), dtype=np.float32)
            self._matrices = (ids, np.ascontiguousarray(text), np.ascontiguousarray(mm))
        return self._matrices

    def validate(self) -> None:
        """Exhaustively check every structural invariant; raise CorruptPayload on failure."""
        for node_id, node in self.nodes.items():
            if node.id != node_id:
                raise CorruptPayload(f"node key {node_id!r} != node id {node.id!r}")
            if len(node.info_children) != 3:
                raise CorruptPayload(f"{node_id} has {len(node.info_children)} info children")
            categories = set()
            for info_id in node.info_children:
                child = self.info.get(info_id)
                if child is None:
                    raise CorruptPayload(f"{node_id} references missing info {info_id}")
                if child.parent_id != node_id:
                    raise CorruptPayload(f"info {info_id} parent mismatch")
                if not child.body:
                    raise CorruptPayload(f"info {info_id} has empty body")
                categories.add(child.category)
            if categories != set(InfoCategory):
                raise CorruptPayload(f"{node_id} info categories incomplete: {categories}")
            for emb_name in ("text_embedding", "mm_embedding"):
                emb = getattr(node, emb_name)
                if emb.shape != (self.dimension,):
                    raise CorruptPayload(f"{node_id}.{emb_name} has shape {emb.shape}")
                if emb.dtype != np.float32:
                    raise CorruptPayload(f"{node_id}.{emb_name} dtype {emb.dtype}")
                if not is_normalized(emb):
                    raise CorruptPayload(f"{node_id}.{emb_name} is not unit norm")
        seen_pairs = set()
        expected_adj: Dict[str, Set[str]] = {node_id: set() for node_id in self.nodes}
        for edge in self.edges:
            if edge.a == edge.b:
                raise CorruptPayload(f"self edge on {edge.a}")
            if edge.a not in self.nodes or edge.b not in self.nodes:
                raise CorruptPayload(f"edge {edge.a}--{edge.b} references missing node")
            if not (-1.0 <= edge.weight <= 1.0):
                raise CorruptPayload(f"edge weight {edge.weight} outside [-1, 1]")
            pair = (min(edge.a, edge.b), max(edge.a, edge.b))
            if pair in seen_pairs:
                raise CorruptPayload(f"duplicate edge {pair}")
            seen_pairs.add(pair)
            expected_adj[edge.a].add(edge.b)
            expected_adj[edge.b].add(edge.a)
        actual_adj = {k: set(v) for k, v in self.adjacency.items() if v}
        expected_nonempty = {k: v for k, v in expected_adj.items() if v}
        if actual_adj != expected_nonempty:
            raise CorruptPayload("adjacency is not the symmetric closure of edges")


def slug_id(name: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    if not slug:
        raise InvalidRecord(f"cannot derive id from name {name!r}")
    return slug


def _build_adjacency(node_ids: Iterable[str],
                     edges: Sequence[SimilarityEdge]) -> Dict[str, Set[str]]:
    adjacency: Dict[str, Set[str]] = {node_id: set() for node_id in node_ids}
    for edge in edges:
        adjacency[edge.a].add(edge.b)
        adjacency[edge.b].add(edge.a)
    return adjacency


def build_graph(dimension: int, nodes: Sequence[ConditionNode],
                info: Sequence[InfoNode],
                edges: Sequence[SimilarityEdge]) -> ConditionGraph:
    """Assemble a graph from parts, derive adjacency, and validate invariants."""
    node_map = {n.id: n for n in nodes}
    if len(node_map) != len(nodes):
        raise DuplicateConditionName("duplicate node ids")
    canonical = [SimilarityEdge(min(e.a, e.b), max(e.a, e.b), e.weight) for e in edges]
    canonical.sort(key=lambda e: (e.a, e.b))
    graph = ConditionGraph(
        dimension=dimension,
        nodes=node_map,
        info={i.id: i for i in info},
        edges=canonical,
        adjacency=_build_adjacency(node_map, canonical),
    )
    graph.validate()
    return graph


def _info_nodes_for(record: ConditionRecord, condition_id: str) -> List[InfoNode]:
    treatments_parts = []
    if record.clinical_treatment.strip():
        treatments_parts.append(f"Clinical: {record.clinical_treatment.strip()}")
    if record.home_treatment.strip():
        treatments_parts.append(f"Home: {record.home_treatment.strip()}")
    bodies = {
        InfoCategory.SYMPTOMS: record.symptoms.strip() or _EMPTY_BODY,
        InfoCategory.TREATMENTS: "\n".join(treatments_parts) or _EMPTY_BODY,
        InfoCategory.PREVENTION: record.prevention.strip() or _EMPTY_BODY,
    }
    return [
        InfoNode(id=f"{condition_id}#{cat.value}", category=cat,
                 body=bodies[cat], parent_id=condition_id)
        for cat in InfoCategory
    ]


def _edges_for(nodes: Sequence[ConditionNode], policy: EdgePolicy) -> List[SimilarityEdge]:
    ordered = sorted(nodes, key=lambda n: n.id)
    n = len(ordered)
    weights: Dict[Tuple[str, str], float] = {}
    sims = np.full((n, n), -2.0)
    for i in range(n):
        for j in range(i + 1, n):
            sims[i, j] = sims[j, i] = cosine(ordered[i].text_embedding,
                                             ordered[j].text_embedding)
    if policy.mode == "threshold":
        for i in range(n):
            for j in range(i + 1, n):
                if sims[i, j] >= policy.threshold:
                    weights[(ordered[i].id, ordered[j].id)] = sims[i, j]
    else:
        for i in range(n):
            # stable ranking: similarity descending, peer id ascending
            ranked = sorted((j for j in range(n) if j != i),
                            key=lambda j: (-sims[i, j], ordered[j].id))
            for j in ranked[:policy.top_k]:
                key = (min(ordered[i].id, ordered[j].id),
                       max(ordered[i].id, ordered[j].id))
                weights[key] = sims[i, j]
    return [SimilarityEdge(a, b, w) for (a, b), w in sorted(weights.items())]


def ingest(records: Sequence[ConditionRecord], encoder: EncoderClient,
           edge_policy: Optional[EdgePolicy] = None) -> ConditionGraph:
    """Build a ConditionGraph from ingestion records.

    One condition node per record: the text embedding encodes the definition;
    the multimodal embedding is the re-normalized mean of the per-image
    encodings (image-only, empty text), or a copy of the text embedding for
    records without images. Inter-condition edges follow edge_policy.
    """
    records = list(records)
    if not records:
        raise EmptyRecordSet("no ingestion records")
    policy = edge_policy or EdgePolicy()
    dimension = encoder.dimension()

    seen_names: Set[str] = set()
    nodes: List[ConditionNode] = []
    info: List[InfoNode] = []
    for record in records:
        name = record.name.strip()
        if not name:
            raise InvalidRecord("record with empty name")
        if not record.definition.strip():
            raise InvalidRecord(f"record {name!r} has empty definition")
        key = name.lower()
        if key in seen_names:
            raise DuplicateConditionName(name)
        seen_names.add(key)
        condition_id = slug_id(name)

        text_embedding = encoder.encode_text(record.definition)
        if record.image_paths:
            image_vecs = [encoder.encode_multimodal("", ref) for ref in record.image_paths]
            mm_embedding = mean_pool(image_vecs)
        else:
            mm_embedding = text_embedding.copy()

        children = _info_nodes_for(record, condition_id)
        info.extend(children)
        nodes.append(ConditionNode(
            id=condition_id, name=name, definition=record.definition.strip(),
            text_embedding=text_embedding, mm_embedding=mm_embedding,
            info_children=tuple(c.id for c in children),
        ))
    if len({n.id for n in nodes}) != len(nodes):
        raise DuplicateConditionName("distinct names collapse to one id slug")

    return build_graph(dimension, nodes, info, _edges_for(nodes, policy))


def read_records_csv(path: str) -> List[ConditionRecord]:
    """Read ingestion records from a UTF-8 CSV with the documented header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return []
        if header != CSV_HEADER:
            raise InvalidRecord(f"CSV header must be {','.join(CSV_HEADER)}")
        records = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise InvalidRecord(f"line {line_no}: expected {len(CSV_HEADER)} columns")
            name, definition, symptoms, clinical, home, prevention, images = row
            records.append(ConditionRecord(
                name=name, definition=definition, symptoms=symptoms,
                clinical_treatment=clinical, home_treatment=home,
                prevention=prevention,
                image_paths=[p for p in images.split(";") if p],
            ))
    return records


# --- persistence ---

def save(graph: ConditionGraph) -> bytes:
    """Serialize to the single-file container format (deterministic bytes)."""
    ids = graph.node_ids
    header = {
        "schema_version": SCHEMA_VERSION,
        "dimension": graph.dimension,
        "nodes": [
            {
                "id": node_id,
                "name": graph.nodes[node_id].name,
                "definition": graph.nodes[node_id].definition,
                "info_children": list(graph.nodes[node_id].info_children),
            }
            for node_id in ids
        ],
        "info": [
            {
                "id": info.id,
                "category": info.category.value,
                "body": info.body,
                "parent_id": info.parent_id,
            }
            for info in sorted(graph.info.values(), key=lambda i: i.id)
        ],
        "edges": [[e.a, e.b, e.weight] for e in
                  sorted(graph.edges, key=lambda e: (e.a, e.b))],
    }
    header_bytes = json.dumps(header, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    blocks = [struct.pack("<I", len(header_bytes)), header_bytes]
    for node_id in ids:
        node = graph.nodes[node_id]
        blocks.append(node.text_embedding.astype("<f4").tobytes())
        blocks.append(node.mm_embedding.astype("<f4").tobytes())
    body = b"".join(blocks)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def load(payload: bytes) -> ConditionGraph:
    """Deserialize a container produced by save(); validates CRC, version, invariants."""
    if len(payload) < 8:
        raise CorruptPayload("payload too short")
    body, crc_bytes = payload[:-4], payload[-4:]
    if struct.unpack("<I", crc_bytes)[0] != (zlib.crc32(body) & 0xFFFFFFFF):
        raise CorruptPayload("CRC32 mismatch")
    header_len = struct.unpack("<I", body[:4])[0]
    if 4 + header_len > len(body):
        raise CorruptPayload("truncated header")
    try:
        header = json.loads(body[4:4 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptPayload(f"unreadable header: {exc}") from exc
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"schema version {version}, expected {SCHEMA_VERSION}")
    dimension = int(header["dimension"])

    embedding_bytes = body[4 + header_len:]
    node_entries = header["nodes"]
    expected = len(node_entries) * 2 * dimension * 4
    if len(embedding_bytes) != expected:
        raise CorruptPayload(f"embedding block is {len(embedding_bytes)} bytes, "
                             f"expected {expected}")
    flat = np.frombuffer(embedding_bytes, dtype="<f4").reshape(-1, dimension) \
        if expected else np.zeros((0, dimension), dtype=np.float32)

    info = [InfoNode(id=e["id"], category=InfoCategory(e["category"]),
                     body=e["body"], parent_id=e["parent_id"])
            for e in header["info"]]
    nodes = []
    for idx, entry in enumerate(node_entries):
        nodes.append(ConditionNode(
            id=entry["id"], name=entry["name"], definition=entry["definition"],
            text_embedding=np.array(flat[2 * idx], dtype=np.float32),
            mm_embedding=np.array(flat[2 * idx + 1], dtype=np.float32),
            info_children=tuple(entry["info_children"]),
        ))
    edges = [SimilarityEdge(a, b, float(w)) for a, b, w in header["edges"]]
    try:
        return build_graph(dimension, nodes, info, edges)
    except DuplicateConditionName as exc:
        raise CorruptPayload(str(exc)) from exc


def save_file(graph: ConditionGraph, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(save(graph))


def load_file(path: str) -> ConditionGraph:
    with open(path, "rb") as fh:
        return load(fh.read())
