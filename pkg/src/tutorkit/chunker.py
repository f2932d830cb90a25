"""Split merged documents into overlapping retrieval chunks.

Tokens are approximated by whitespace splitting. Windowing is heading-aware
only insofar as the nearest preceding heading-like text line labels each
chunk's topic; formula and diagram blocks stay intact when the policy asks
for boundary respect.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from .errors import EmptyDocument, PolicyError
from .ingest import BlockKind, Document

DEFAULT_MAX_CHUNK_TOKENS = 400
DEFAULT_OVERLAP_TOKENS = 50

# All-caps line or a numbered section line ("3.2 Torsion of shafts").
_HEADING_RE = re.compile(r"^(?:[A-Z][A-Z0-9 \-:,']{3,}|\d+(?:\.\d+)*\s+\S.*)$")


@dataclass(frozen=True)
class ChunkPolicy:
    max_chunk_tokens: int = DEFAULT_MAX_CHUNK_TOKENS
    overlap_tokens: int = DEFAULT_OVERLAP_TOKENS
    respect_boundaries: bool = True


@dataclass(frozen=True)
class ChunkMetadata:
    topic_domain: str
    source_ref: str
    difficulty_tier: str = "Foundational"
    prerequisites: tuple[str, ...] = ()
    oversized: bool = False

    def to_dict(self) -> dict:
        return {
            "topic_domain": self.topic_domain,
            "source_ref": self.source_ref,
            "difficulty_tier": self.difficulty_tier,
            "prerequisites": list(self.prerequisites),
            "oversized": self.oversized,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChunkMetadata":
        return cls(
            topic_domain=d["topic_domain"],
            source_ref=d["source_ref"],
            difficulty_tier=d.get("difficulty_tier", "Foundational"),
            prerequisites=tuple(d.get("prerequisites", ())),
            oversized=bool(d.get("oversized", False)),
        )


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    body: str
    token_count: int
    metadata: ChunkMetadata

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "body": self.body,
            "token_count": self.token_count,
            "metadata": self.metadata.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Chunk":
        return cls(
            chunk_id=d["chunk_id"],
            body=d["body"],
            token_count=d["token_count"],
            metadata=ChunkMetadata.from_dict(d["metadata"]),
        )


def chunk_id_for(body: str, source_ref: str) -> str:
    digest = hashlib.sha256(f"{body}\x00{source_ref}".encode("utf-8")).hexdigest()
    return digest[:16]


def _is_heading(body: str) -> bool:
    line = body.strip().splitlines()[0] if body.strip() else ""
    return bool(_HEADING_RE.match(line)) and len(line.split()) <= 12


@dataclass
class _Segment:
    tokens: list[str]
    page: int
    atomic: bool
    topic: str


def chunk_document(doc: Document, policy: ChunkPolicy = ChunkPolicy()) -> list[Chunk]:
    if policy.overlap_tokens < 0 or policy.max_chunk_tokens <= policy.overlap_tokens:
        raise PolicyError(
            f"need max_chunk_tokens > overlap_tokens >= 0, got "
            f"{policy.max_chunk_tokens}/{policy.overlap_tokens}"
        )
    segments: list[_Segment] = []
    topic = doc.title or doc.doc_id
    for block in doc.blocks:
        tokens = block.body.split()
        if not tokens:
            continue
        if block.kind is BlockKind.TEXT and _is_heading(block.body):
            topic = block.body.strip().splitlines()[0]
        atomic = policy.respect_boundaries and block.kind in (
            BlockKind.FORMULA,
            BlockKind.DIAGRAM,
        )
        segments.append(_Segment(tokens, block.page, atomic, topic))
    if not segments:
        raise EmptyDocument(f"document {doc.doc_id!r} has no tokens")

    chunks: list[Chunk] = []
    window: list[str] = []
    pages: list[int] = []
    window_topic = segments[0].topic
    max_tok, overlap = policy.max_chunk_tokens, policy.overlap_tokens

    def flush(oversized: bool = False) -> None:
        if not window:
            return
        body = " ".join(window)
        ref = f"{doc.doc_id}:p{min(pages)}-p{max(pages)}"
        meta = ChunkMetadata(
            topic_domain=window_topic,
            source_ref=ref,
            oversized=oversized,
        )
        chunks.append(Chunk(chunk_id_for(body, ref), body, len(window), meta))

    for seg in segments:
        if seg.atomic and len(seg.tokens) > max_tok:
            # Oversized unsplittable block becomes its own flagged chunk.
            flush()
            window, pages = list(seg.tokens), [seg.page]
            window_topic = seg.topic
            flush(oversized=True)
            window, pages = [], []
            continue
        if seg.atomic and len(window) + len(seg.tokens) > max_tok:
            flush()
            carry = window[-overlap:] if overlap else []
            window = carry + list(seg.tokens)
            pages = [pages[-1]] * len(carry) if carry else []
            pages += [seg.page] * len(seg.tokens)
            window_topic = seg.topic
            continue
        remaining = list(seg.tokens)
        while remaining:
            if not window:
                window_topic = seg.topic
            space = max_tok - len(window)
            take = remaining[:space]
            window.extend(take)
            pages.extend([seg.page] * len(take))
            remaining = remaining[len(take):]
            if len(window) == max_tok and (remaining or seg is not segments[-1]):
                flush()
                carry = window[-overlap:] if overlap else []
                carry_pages = pages[-overlap:] if overlap else []
                window, pages = list(carry), list(carry_pages)
    flush()
    return chunks


def chunks_to_json(chunks: list[Chunk]) -> str:
    return json.dumps([c.to_dict() for c in chunks], ensure_ascii=False)


def chunks_from_json(text: str) -> list[Chunk]:
    return [Chunk.from_dict(d) for d in json.loads(text)]
