"""Merge per-extractor outputs into unified multimodal documents.

External extractors (layout, formula OCR, vision) hand their results over in a
JSON interchange format; this module aligns them by page, deduplicates
near-identical text, and tracks per-modality character coverage.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import EmptyMerge, EncodingError, PageOutOfRange, SchemaError

FORMULA_PLACEHOLDER = "<!-- formula-not-decoded -->"

# Near-duplicate threshold for same-page text blocks from different origins.
DEDUP_SIMILARITY = 0.9


class BlockKind(str, Enum):
    TEXT = "text"
    TABLE = "table"
    FORMULA = "formula"
    DIAGRAM = "diagram"


# Deterministic intra-page ordering of modalities.
_KIND_PRIORITY = {
    BlockKind.TEXT: 0,
    BlockKind.TABLE: 1,
    BlockKind.FORMULA: 2,
    BlockKind.DIAGRAM: 3,
}


@dataclass(frozen=True)
class ContentBlock:
    kind: BlockKind
    page: int
    body: str
    origin: str
    order: int


@dataclass
class Document:
    doc_id: str
    title: str
    source_path: str
    pages: int
    blocks: list[ContentBlock] = field(default_factory=list)
    coverage: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "doc_id": self.doc_id,
                "title": self.title,
                "source_path": self.source_path,
                "pages": self.pages,
                "blocks": [
                    {
                        "kind": b.kind.value,
                        "page": b.page,
                        "order": b.order,
                        "body": b.body,
                        "origin": b.origin,
                    }
                    for b in self.blocks
                ],
                "coverage": self.coverage,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, text: str) -> "Document":
        raw = json.loads(text)
        blocks = [
            ContentBlock(
                kind=BlockKind(b["kind"]),
                page=b["page"],
                body=b["body"],
                origin=b.get("origin", ""),
                order=b["order"],
            )
            for b in raw["blocks"]
        ]
        return cls(
            doc_id=raw["doc_id"],
            title=raw.get("title", ""),
            source_path=raw.get("source_path", ""),
            pages=raw["pages"],
            blocks=blocks,
            coverage={k: int(v) for k, v in raw.get("coverage", {}).items()},
        )


def _balanced_braces(text: str) -> bool:
    depth = 0
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def parse_extraction(payload: bytes) -> tuple[list[ContentBlock], int]:
    """Parse one extractor payload into content blocks.

    Returns (blocks, dropped) where dropped counts blocks discarded for empty
    bodies, undecoded-formula placeholders, or unbalanced formula braces.
    """
    try:
        text = payload.decode("utf-8") if isinstance(payload, (bytes, bytearray)) else payload
    except UnicodeDecodeError as exc:
        raise EncodingError(f"payload is not valid UTF-8: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"payload is not valid JSON: {exc}") from exc

    for key in ("origin", "doc_id", "pages", "blocks"):
        if key not in raw:
            raise SchemaError(f"missing top-level field {key!r}")
    origin = raw["origin"]
    if not isinstance(raw["blocks"], list):
        raise SchemaError("blocks must be a list")

    blocks: list[ContentBlock] = []
    dropped = 0
    seen: set[tuple[int, int]] = set()
    for i, b in enumerate(raw["blocks"]):
        for key in ("kind", "page", "order", "body"):
            if key not in b:
                raise SchemaError(f"block {i}: missing field {key!r}")
        try:
            kind = BlockKind(b["kind"])
        except ValueError:
            raise SchemaError(f"block {i}: unknown kind {b['kind']!r}") from None
        page, order = b["page"], b["order"]
        if not isinstance(page, int) or page < 1:
            raise SchemaError(f"block {i}: page must be a positive integer")
        if not isinstance(order, int) or order < 0:
            raise SchemaError(f"block {i}: order must be a non-negative integer")
        if (page, order) in seen:
            raise SchemaError(f"block {i}: duplicate (page={page}, order={order})")
        seen.add((page, order))
        body = str(b["body"]).strip()
        if not body or FORMULA_PLACEHOLDER in body:
            dropped += 1
            continue
        if kind is BlockKind.FORMULA and not _balanced_braces(body):
            dropped += 1
            continue
        blocks.append(ContentBlock(kind=kind, page=page, body=body, origin=origin, order=order))
    return blocks, dropped


def _edit_similarity(a: str, b: str) -> float:
    """Normalized edit-distance similarity: 1 - lev(a, b) / max(len)."""
    if a == b:
        return 1.0
    la, lb = len(a), len(b)
    longest = max(la, lb)
    if longest == 0:
        return 1.0
    # Length difference alone bounds the distance from below.
    if abs(la - lb) / longest > 1.0 - DEDUP_SIMILARITY:
        return 1.0 - abs(la - lb) / longest
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        ca = a[i - 1]
        for j in range(1, lb + 1):
            cost = 0 if ca == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return 1.0 - prev[lb] / longest


def merge_documents(
    extractions: Sequence[tuple[str, Iterable[ContentBlock]]],
    *,
    doc_id: str,
    title: str,
    source_path: str = "",
    pages: int,
) -> Document:
    """Interleave blocks from all extractors into one Document.

    Same-page text blocks from different origins that are near-duplicates
    (edit similarity >= 0.9) collapse to the longer block.
    """
    if not extractions:
        raise EmptyMerge("no extractions given")
    all_blocks: list[ContentBlock] = []
    for _, blocks in extractions:
        all_blocks.extend(blocks)
    if not all_blocks:
        raise EmptyMerge("no blocks from any extractor")
    for b in all_blocks:
        if b.page > pages:
            raise PageOutOfRange(f"block on page {b.page} exceeds page count {pages}")

    all_blocks.sort(key=lambda b: (b.page, _KIND_PRIORITY[b.kind], b.origin, b.order))

    kept: list[ContentBlock] = []
    for cand in all_blocks:
        duplicate_of = None
        for i, prev in enumerate(kept):
            if prev.page != cand.page or prev.kind is not cand.kind:
                continue
            # Exact repeats collapse regardless of origin (self-merge is a
            # no-op); fuzzy matching applies only to cross-origin text.
            if prev.body == cand.body:
                duplicate_of = i
                break
            if (
                cand.kind is BlockKind.TEXT
                and prev.origin != cand.origin
                and _edit_similarity(prev.body, cand.body) >= DEDUP_SIMILARITY
            ):
                duplicate_of = i
                break
        if duplicate_of is None:
            kept.append(cand)
        elif len(cand.body) > len(kept[duplicate_of].body):
            kept[duplicate_of] = cand

    # Renumber order within each page so the merged document carries a single
    # consistent (page, order) sequence.
    final: list[ContentBlock] = []
    last_page, position = 0, 0
    for b in kept:
        if b.page != last_page:
            last_page, position = b.page, 0
        final.append(ContentBlock(b.kind, b.page, b.body, b.origin, position))
        position += 1

    coverage: dict[str, int] = {}
    for b in final:
        coverage[b.kind.value] = coverage.get(b.kind.value, 0) + len(b.body)

    return Document(
        doc_id=doc_id,
        title=title,
        source_path=source_path,
        pages=pages,
        blocks=final,
        coverage=coverage,
    )
