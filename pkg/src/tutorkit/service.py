"""HTTP JSON API tying guardrail, retrieval, and generation together.

Request flow for /ask: guardrail first (a rejection returns immediately and
makes no upstream calls), then query embedding, topic-adaptive retrieval,
prompt assembly, generation, and citation validation. /ingest rebuilds the
index from a merged document and swaps it in atomically; /health reports
index state.
"""
from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import index as vindex
from .answer import (
    ContextChunk,
    GenerationConfig,
    Session,
    assemble_prompt,
    generate,
    rejection_answer,
    validate_citations,
)
from .chunker import ChunkPolicy, chunk_document
from .embed import Backend, EmbedderConfig, embed_texts
from .errors import TutorkitError
from .guardrail import GuardrailConfig, classify, default_config, detect_topics
from .ingest import Document

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("tutorkit.service")

SESSION_TTL_S = 2 * 60 * 60


@dataclass(frozen=True)
class RateLimit:
    requests_per_minute: int = 60
    burst: int = 10


@dataclass
class ServiceConfig:
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    guardrail: GuardrailConfig = field(default_factory=default_config)
    chunk_policy: ChunkPolicy = field(default_factory=ChunkPolicy)
    rate_limit: RateLimit = field(default_factory=RateLimit)
    max_question_chars: int = 2000
    log_question_bodies: bool = False


class _TokenBucket:
    def __init__(self, limit: RateLimit):
        self.rate = limit.requests_per_minute / 60.0
        self.capacity = limit.burst
        self.buckets: dict[str, tuple[float, float]] = {}
        self.lock = threading.Lock()

    def allow(self, key: str) -> tuple[bool, float]:
        """Returns (allowed, retry_after_seconds)."""
        now = time.monotonic()
        with self.lock:
            tokens, last = self.buckets.get(key, (float(self.capacity), now))
            tokens = min(self.capacity, tokens + (now - last) * self.rate)
            if tokens >= 1.0:
                self.buckets[key] = (tokens - 1.0, now)
                return True, 0.0
            self.buckets[key] = (tokens, now)
            return False, (1.0 - tokens) / self.rate


class AskRequest(BaseModel):
    question: str
    session_id: str | None = None
    topic_filter: str | None = None


class IngestRequest(BaseModel):
    document: dict


class AppState:
    def __init__(self, config: ServiceConfig, index: vindex.VectorIndex | None = None):
        self.config = config
        self._index = index
        self._index_lock = threading.Lock()
        self.sessions: dict[str, Session] = {}
        self._sessions_lock = threading.Lock()
        self.limiter = _TokenBucket(config.rate_limit)
        self.started_at = time.time()

    @property
    def index(self) -> vindex.VectorIndex | None:
        return self._index

    def swap_index(self, new_index: vindex.VectorIndex) -> None:
        with self._index_lock:
            self._index = new_index

    def session(self, session_id: str | None) -> Session:
        with self._sessions_lock:
            now = time.time()
            expired = [
                sid for sid, s in self.sessions.items() if now - s.created_at > SESSION_TTL_S
            ]
            for sid in expired:
                del self.sessions[sid]
            if session_id and session_id in self.sessions:
                return self.sessions[session_id]
            s = Session(session_id=session_id) if session_id else Session()
            self.sessions[s.session_id] = s
            return s


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message, **extra})


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="tutorkit", version="0.1.0")
    app.state.tutorkit = state

    @app.post("/ask")
    def ask(req: AskRequest, request: Request):
        cfg = state.config
        t0 = time.perf_counter()
        client_key = request.headers.get("x-client-key", "anonymous")
        allowed, retry_after = state.limiter.allow(client_key)
        if not allowed:
            return JSONResponse(
                status_code=429,
                content={"error": "rate limit exceeded"},
                headers={"Retry-After": f"{retry_after:.1f}"},
            )
        question = req.question.strip()
        if not question:
            return _error(400, "question is empty")
        if len(question) > cfg.max_question_chars:
            return _error(400, f"question exceeds {cfg.max_question_chars} characters")

        session = state.session(req.session_id)
        verdict = classify(cfg.guardrail, question)
        rejected_body = None
        if not verdict.relevant:
            ans = rejection_answer(cfg.guardrail.rejection_message, session.session_id)
            with session.lock:
                session.append(question, ans)
            rejected_body = {
                "answer": ans.text,
                "rejected": True,
                "citations": [],
                "session_id": session.session_id,
                "retrieved": [],
            }
        _log_request(cfg, "/ask", 200, t0, rejected=rejected_body is not None)
        if rejected_body is not None:
            return rejected_body

        if state.index is None:
            return _error(503, "index not loaded")
        idx = state.index
        try:
            qvec = embed_texts(cfg.embedder, [question])[0]
        except TutorkitError as exc:
            return _error(502, f"embedding backend failed: {exc}")
        k = vindex.adaptive_k(len(detect_topics(cfg.guardrail, question)))
        results = vindex.search(idx, qvec, k)
        if req.topic_filter:
            by_id = {e.chunk_id: e for e in idx.entries}
            results = [
                r
                for r in results
                if req.topic_filter.lower() in by_id[r.chunk_id].metadata.topic_domain.lower()
            ]
            if not results:
                return _error(404, "no indexed material matches the topic filter")
        by_id = {e.chunk_id: e for e in idx.entries}
        context = [ContextChunk(result=r, body=by_id[r.chunk_id].body) for r in results]
        with session.lock:
            prompt, included = assemble_prompt(cfg.generation, question, context, session)
            try:
                raw = generate(cfg.generation, prompt)
            except TutorkitError as exc:
                return _error(502, f"generation backend failed: {exc}")
            ans = validate_citations(raw, included, session.session_id)
            session.append(question, ans)
        return {
            "answer": ans.text,
            "rejected": False,
            "citations": [
                {"number": c.number, "source_ref": c.source_ref, "score": c.score}
                for c in ans.citations
            ],
            "session_id": session.session_id,
            "retrieved": [{"chunk_id": r.chunk_id, "score": r.score} for r in results],
        }

    @app.post("/ingest")
    def ingest(req: IngestRequest):
        cfg = state.config
        try:
            doc = Document.from_json(json.dumps(req.document))
        except (KeyError, ValueError, TypeError) as exc:
            return _error(400, f"invalid document: {exc}")
        try:
            chunks = chunk_document(doc, cfg.chunk_policy)
        except TutorkitError as exc:
            return _error(400, f"document not chunkable: {exc}")
        try:
            vectors = embed_texts(cfg.embedder, [c.body for c in chunks])
        except TutorkitError as exc:
            # Embedding failed: the previous index keeps serving.
            return _error(502, f"embedding backend failed: {exc}")
        new_entries = [
            vindex.IndexEntry(chunk_id=c.chunk_id, vector=v, metadata=c.metadata, body=c.body)
            for c, v in zip(chunks, vectors)
        ]
        old = state.index
        if old is not None:
            existing = {e.chunk_id for e in old.entries}
            merged = list(old.entries) + [e for e in new_entries if e.chunk_id not in existing]
            ann = old.ann_params
        else:
            merged = new_entries
            ann = vindex.AnnParams()
        state.swap_index(vindex.build(merged, ann))
        return {"chunks_added": len(new_entries)}

    @app.get("/health")
    def health():
        idx = state.index
        size = len(idx) if idx is not None else 0
        return {
            "status": "ok" if size > 0 else "degraded",
            "index_size": size,
            "model_id": idx.model_id if idx is not None else None,
            "uptime_s": time.time() - state.started_at,
        }

    return app


@dataclass
class ServeSettings:
    """Top-level settings parsed from a ``serve --config`` TOML file."""

    bind_address: str
    index_path: str | None
    config: ServiceConfig

    @property
    def host(self) -> str:
        return self.bind_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.bind_address.rsplit(":", 1)[1])


def load_settings(path: str) -> ServeSettings:
    """Parse a service TOML file.

    Recognized keys: bind_address, index_path, guardrail_config_path,
    max_question_chars, log_question_bodies, plus [rate_limit],
    [embedder], and [generation] tables.
    """
    from .guardrail import load_config as load_guardrail_config

    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    rl = raw.get("rate_limit", {})
    emb = raw.get("embedder", {})
    gen = raw.get("generation", {})
    embedder = EmbedderConfig(
        backend=Backend(emb.get("backend", "deterministic_local")),
        endpoint_url=emb.get("endpoint_url", ""),
        api_key_env=emb.get("api_key_env", ""),
        model_id=emb.get("model_id", "local-trigram"),
        dim=emb.get("dim", 256),
    )
    generation = GenerationConfig(
        **{k: v for k, v in gen.items() if k in GenerationConfig.__dataclass_fields__}
    )
    guardrail = (
        load_guardrail_config(raw["guardrail_config_path"])
        if raw.get("guardrail_config_path")
        else default_config()
    )
    config = ServiceConfig(
        embedder=embedder,
        generation=generation,
        guardrail=guardrail,
        rate_limit=RateLimit(
            requests_per_minute=rl.get("requests_per_minute", 60),
            burst=rl.get("burst", 10),
        ),
        max_question_chars=raw.get("max_question_chars", 2000),
        log_question_bodies=raw.get("log_question_bodies", False),
    )
    if config.rate_limit.requests_per_minute <= 0 or config.rate_limit.burst <= 0:
        raise ValueError("rate_limit values must be positive")
    return ServeSettings(
        bind_address=raw.get("bind_address", "127.0.0.1:8000"),
        index_path=raw.get("index_path"),
        config=config,
    )


def _log_request(cfg: ServiceConfig, route: str, status: int, t0: float, rejected: bool) -> None:
    latency_ms = (time.perf_counter() - t0) * 1000
    logger.info(
        "route=%s status=%d latency_ms=%.1f rejected=%s", route, status, latency_ms, rejected
    )
