"""Persisted vector store with exact and approximate cosine search.

Entries hold unit-normalized vectors, so cosine reduces to a dot product.
Exact mode is a full linear scan; approximate mode runs a beam search over a
deterministically built nearest-neighbor graph. Persistence uses a portable
little-endian binary format with a CRC32 integrity check (layout documented
in ``save``).
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from ..chunker import ChunkMetadata
from ..embed import EmbeddingVector
from ..errors import (
    ChecksumError,
    DimensionMismatch,
    DuplicateChunkId,
    EmptyIndex,
    TruncatedFile,
    VersionMismatch,
)
from . import kernels

MAGIC = b"TKVX"
FORMAT_VERSION = 1
GRAPH_SEED = 0x5EED

DEFAULT_K_BASE = 5
DEFAULT_K_EXTRA = 3


class SearchMode(str, Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


@dataclass(frozen=True)
class AnnParams:
    mode: SearchMode = SearchMode.EXACT
    neighbors_per_node: int = 16
    search_breadth: int = 256


@dataclass(frozen=True)
class IndexEntry:
    chunk_id: str
    vector: EmbeddingVector
    metadata: ChunkMetadata
    body: str


@dataclass(frozen=True)
class RetrievalResult:
    chunk_id: str
    score: float
    rank: int
    source_ref: str


@dataclass
class VectorIndex:
    dim: int
    model_id: str
    version: int
    ann_params: AnnParams
    entries: list[IndexEntry]
    # Dense duplicates of the entry data for the kernels.
    matrix: np.ndarray = field(repr=False)
    chunk_ids: np.ndarray = field(repr=False)
    graph: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.entries)


def _build_graph(matrix: np.ndarray, neighbors_per_node: int) -> np.ndarray:
    """Symmetrized exact-kNN graph, padded to 2*M columns with -1.

    Construction is a pure function of the entry matrix and M, so rebuilds
    are reproducible without storing randomness.
    """
    n = matrix.shape[0]
    m = min(neighbors_per_node, n - 1)
    if m <= 0:
        return np.full((n, 1), -1, dtype=np.int32)
    sims = matrix @ matrix.T
    np.fill_diagonal(sims, -np.inf)
    if m < n - 1:
        knn = np.argpartition(-sims, m, axis=1)[:, :m]
    else:
        knn = np.argsort(-sims, axis=1)[:, :m]
    adjacency: list[set[int]] = [set() for _ in range(n)]
    for i in range(n):
        for j in knn[i]:
            adjacency[i].add(int(j))
            adjacency[int(j)].add(i)
    cap = 2 * m
    out = np.full((n, cap), -1, dtype=np.int32)
    for i in range(n):
        ranked = sorted(adjacency[i], key=lambda j: (-sims[i, j], j))
        for t, j in enumerate(ranked[:cap]):
            out[i, t] = j
    return out


def build(entries: Sequence[IndexEntry], ann_params: AnnParams = AnnParams()) -> VectorIndex:
    if not entries:
        raise EmptyIndex("cannot build an index from zero entries")
    dim = entries[0].vector.dim
    model_id = entries[0].vector.model_id
    seen: set[str] = set()
    for e in entries:
        if e.vector.dim != dim:
            raise DimensionMismatch(f"entry {e.chunk_id!r} has dim {e.vector.dim}, expected {dim}")
        if e.chunk_id in seen:
            raise DuplicateChunkId(f"duplicate chunk_id {e.chunk_id!r}")
        seen.add(e.chunk_id)
    entries = list(entries)
    matrix = np.stack([e.vector.as_array() for e in entries])
    chunk_ids = np.array([e.chunk_id for e in entries])
    graph = None
    if ann_params.mode is SearchMode.APPROXIMATE:
        graph = _build_graph(matrix, ann_params.neighbors_per_node)
    return VectorIndex(
        dim=dim,
        model_id=model_id,
        version=FORMAT_VERSION,
        ann_params=ann_params,
        entries=entries,
        matrix=matrix,
        chunk_ids=chunk_ids,
        graph=graph,
    )


def _entry_points(n: int, count: int = 16) -> np.ndarray:
    step = max(n // count, 1)
    return np.arange(0, n, step, dtype=np.int32)[:count]


def _ranked(index: VectorIndex, idxs: np.ndarray, scores: np.ndarray, k: int) -> list[RetrievalResult]:
    order = sorted(range(len(idxs)), key=lambda i: (-scores[i], index.chunk_ids[idxs[i]]))
    results = []
    for rank, i in enumerate(order[:k], start=1):
        entry = index.entries[idxs[i]]
        results.append(
            RetrievalResult(
                chunk_id=entry.chunk_id,
                score=float(scores[i]),
                rank=rank,
                source_ref=entry.metadata.source_ref,
            )
        )
    return results


def search(index: VectorIndex, query: EmbeddingVector, k: int) -> list[RetrievalResult]:
    """Top-k by cosine score; ties broken by ascending chunk_id."""
    if len(index.entries) == 0:
        raise EmptyIndex("search over an empty index")
    if query.dim != index.dim:
        raise DimensionMismatch(f"query dim {query.dim} != index dim {index.dim}")
    if k < 1:
        raise ValueError("k must be >= 1")
    q = query.as_array()
    norm = np.linalg.norm(q)
    if norm > 0 and abs(norm - 1.0) > 1e-9:
        q = q / norm
    n = len(index.entries)
    if index.ann_params.mode is SearchMode.APPROXIMATE and index.graph is not None and n > k:
        ef = max(index.ann_params.search_breadth, k)
        idxs, scores = kernels.beam_search(index.matrix, index.graph, q, min(ef, n), _entry_points(n))
    else:
        scores = kernels.score_all(index.matrix, q)
        idxs = np.arange(n)
    return _ranked(index, np.asarray(idxs), np.asarray(scores, dtype=np.float64), min(k, n))


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFile("payload ended early")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def save(index: VectorIndex) -> bytes:
    """Serialize to bytes.

    Layout (little-endian): magic ``TKVX``, version u32, payload length u64,
    CRC32 of payload u32, then the payload: dim u32, model_id, ann mode,
    neighbors u32, breadth u32, entry count u64, and per entry chunk_id,
    body, metadata JSON (all length-prefixed) plus dim float64 vector
    components. Strings are u32-length-prefixed UTF-8.
    """
    parts = [struct.pack("<I", index.dim), _pack_str(index.model_id)]
    parts.append(_pack_str(index.ann_params.mode.value))
    parts.append(
        struct.pack(
            "<II", index.ann_params.neighbors_per_node, index.ann_params.search_breadth
        )
    )
    parts.append(struct.pack("<Q", len(index.entries)))
    for e in index.entries:
        parts.append(_pack_str(e.chunk_id))
        parts.append(_pack_str(e.body))
        parts.append(_pack_str(json.dumps(e.metadata.to_dict(), ensure_ascii=False)))
        parts.append(e.vector.as_array().astype("<f8").tobytes())
    payload = b"".join(parts)
    header = MAGIC + struct.pack("<IQI", FORMAT_VERSION, len(payload), zlib.crc32(payload))
    return header + payload


def load(data: bytes) -> VectorIndex:
    if len(data) < 20 or data[:4] != MAGIC:
        raise VersionMismatch("not a tutorkit index file (bad magic)")
    version, length, checksum = struct.unpack("<IQI", data[4:20])
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported index format version {version}")
    payload = data[20:]
    if len(payload) < length:
        raise TruncatedFile(f"payload is {len(payload)} bytes, header declares {length}")
    payload = payload[:length]
    if zlib.crc32(payload) != checksum:
        raise ChecksumError("index payload failed CRC32 validation")
    r = _Reader(payload)
    dim = r.u32()
    model_id = r.string()
    mode = SearchMode(r.string())
    neighbors, breadth = struct.unpack("<II", r.take(8))
    count = r.u64()
    entries = []
    for _ in range(count):
        chunk_id = r.string()
        body = r.string()
        metadata = ChunkMetadata.from_dict(json.loads(r.string()))
        vec = np.frombuffer(r.take(dim * 8), dtype="<f8")
        entries.append(
            IndexEntry(
                chunk_id=chunk_id,
                vector=EmbeddingVector(tuple(float(v) for v in vec), dim, model_id),
                metadata=metadata,
                body=body,
            )
        )
    return build(entries, AnnParams(mode, neighbors, breadth))


def adaptive_k(
    topic_family_count: int, k_base: int = DEFAULT_K_BASE, k_extra: int = DEFAULT_K_EXTRA
) -> int:
    """Widen retrieval when a question spans multiple topic families."""
    return k_base + (k_extra if topic_family_count >= 2 else 0)
