import json
from importlib import resources

import pytest
from fastapi.testclient import TestClient

from tutorkit import index as vindex
from tutorkit.answer import GenerationConfig
from tutorkit.chunker import chunk_document
from tutorkit.embed import Backend, EmbedderConfig, embed_texts
from tutorkit.guardrail import DEFAULT_REJECTION_MESSAGE
from tutorkit.ingest import Document
from tutorkit.service import AppState, RateLimit, ServiceConfig, create_app, load_settings


def fixture_documents():
    raw = json.loads(
        resources.files("tutorkit.fixtures").joinpath("torsion_documents.json").read_text()
    )
    return [Document.from_json(json.dumps(d)) for d in raw["documents"]]


def build_index(embedder):
    entries = []
    for doc in fixture_documents():
        for c in chunk_document(doc):
            v = embed_texts(embedder, [c.body])[0]
            entries.append(
                vindex.IndexEntry(chunk_id=c.chunk_id, vector=v, metadata=c.metadata, body=c.body)
            )
    return vindex.build(entries)


@pytest.fixture
def client(upstream, api_key_env):
    embedder = EmbedderConfig(
        backend=Backend.REMOTE,
        endpoint_url=upstream.embeddings_url,
        api_key_env=api_key_env,
        model_id="stub-embed",
        dim=64,
    )
    generation = GenerationConfig(
        endpoint_url=upstream.completions_url, api_key_env=api_key_env
    )
    cfg = ServiceConfig(
        embedder=embedder,
        generation=generation,
        rate_limit=RateLimit(requests_per_minute=6000, burst=1000),
    )
    idx = build_index(embedder)
    upstream.reset()
    return TestClient(create_app(AppState(cfg, idx)))


@pytest.fixture
def local_client():
    cfg = ServiceConfig(rate_limit=RateLimit(requests_per_minute=6000, burst=1000))
    return TestClient(create_app(AppState(cfg)))


RELEVANT_Q = "How do I calculate the stress using Hooke's law?"
OFFTOPIC_Q = "What are the best travel destinations?"


class TestAsk:
    def test_relevant_question_answered_with_citations(self, client, upstream):
        r = client.post("/ask", json={"question": RELEVANT_Q})
        assert r.status_code == 200
        body = r.json()
        assert body["rejected"] is False
        assert len(body["citations"]) >= 1
        assert body["citations"][0]["number"] == 1
        assert body["retrieved"]
        assert body["session_id"]
        assert upstream.completion_calls == 1

    def test_rejected_question_makes_no_upstream_calls(self, client, upstream):
        r = client.post("/ask", json={"question": OFFTOPIC_Q})
        assert r.status_code == 200
        body = r.json()
        assert body["rejected"] is True
        assert body["answer"] == DEFAULT_REJECTION_MESSAGE
        assert body["citations"] == [] and body["retrieved"] == []
        assert upstream.embed_calls == 0 and upstream.completion_calls == 0

    def test_rejection_is_idempotent(self, client):
        a = client.post("/ask", json={"question": OFFTOPIC_Q}).json()
        b = client.post("/ask", json={"question": OFFTOPIC_Q}).json()
        assert a["answer"] == b["answer"]

    def test_empty_and_oversize_questions(self, client):
        assert client.post("/ask", json={"question": "  "}).status_code == 400
        assert client.post("/ask", json={"question": "x" * 2001}).status_code == 400

    def test_session_persists_across_turns(self, client):
        first = client.post("/ask", json={"question": RELEVANT_Q}).json()
        sid = first["session_id"]
        second = client.post(
            "/ask", json={"question": "And what about shear stress?", "session_id": sid}
        ).json()
        assert second["session_id"] == sid

    def test_topic_filter_restricts_results(self, client):
        r = client.post(
            "/ask", json={"question": RELEVANT_Q, "topic_filter": "AXIAL"}
        )
        assert r.status_code == 200
        refs = [c["source_ref"] for c in r.json()["citations"]]
        assert all("axial" in ref for ref in refs)

    def test_topic_filter_no_match_is_404(self, client):
        r = client.post(
            "/ask", json={"question": RELEVANT_Q, "topic_filter": "thermodynamics"}
        )
        assert r.status_code == 404

    def test_generation_failure_is_502(self, client, upstream):
        import tutorkit.embed as embed_mod

        old = embed_mod.RETRY_BASE_DELAY_S
        embed_mod.RETRY_BASE_DELAY_S = 0.001
        try:
            upstream.fail_with = 500
            r = client.post("/ask", json={"question": RELEVANT_Q})
        finally:
            embed_mod.RETRY_BASE_DELAY_S = old
        assert r.status_code == 502

    def test_no_index_is_503(self, local_client, api_key_env):
        r = local_client.post("/ask", json={"question": RELEVANT_Q})
        assert r.status_code == 503

    def test_rate_limit_429_with_retry_after(self, upstream, api_key_env):
        cfg = ServiceConfig(rate_limit=RateLimit(requests_per_minute=60, burst=2))
        c = TestClient(create_app(AppState(cfg)))
        codes = [
            c.post("/ask", json={"question": OFFTOPIC_Q}, headers={"X-Client-Key": "k1"}).status_code
            for _ in range(3)
        ]
        assert codes == [200, 200, 429]
        r = c.post("/ask", json={"question": OFFTOPIC_Q}, headers={"X-Client-Key": "k1"})
        assert "retry-after" in {k.lower() for k in r.headers}
        # A different client key has its own bucket.
        assert (
            c.post(
                "/ask", json={"question": OFFTOPIC_Q}, headers={"X-Client-Key": "k2"}
            ).status_code
            == 200
        )


class TestIngestAndHealth:
    def doc_payload(self):
        raw = json.loads(
            resources.files("tutorkit.fixtures").joinpath("torsion_documents.json").read_text()
        )
        return raw["documents"][0]

    def test_health_degraded_when_empty(self, local_client):
        body = local_client.get("/health").json()
        assert body["status"] == "degraded" and body["index_size"] == 0

    def test_ingest_then_health_and_ask_retrieves(self, local_client):
        r = local_client.post("/ingest", json={"document": self.doc_payload()})
        assert r.status_code == 200
        assert r.json()["chunks_added"] >= 1
        health = local_client.get("/health").json()
        assert health["status"] == "ok"
        assert health["index_size"] == r.json()["chunks_added"]

    def test_malformed_document_400_index_unchanged(self, local_client):
        r = local_client.post("/ingest", json={"document": {"nope": 1}})
        assert r.status_code == 400
        assert local_client.get("/health").json()["index_size"] == 0

    def test_embedder_down_502_old_index_serves(self, upstream, api_key_env):
        local = EmbedderConfig(dim=64)
        cfg = ServiceConfig(
            embedder=EmbedderConfig(
                backend=Backend.REMOTE,
                endpoint_url=upstream.embeddings_url,
                api_key_env=api_key_env,
                dim=64,
            ),
            rate_limit=RateLimit(requests_per_minute=6000, burst=1000),
        )
        idx = build_index(local)  # seeded offline; serving embedder is the stub
        c = TestClient(create_app(AppState(cfg, idx)))
        import tutorkit.embed as embed_mod

        old = embed_mod.RETRY_BASE_DELAY_S
        embed_mod.RETRY_BASE_DELAY_S = 0.001
        try:
            upstream.fail_with = 500
            r = c.post("/ingest", json={"document": self.doc_payload()})
        finally:
            embed_mod.RETRY_BASE_DELAY_S = old
        assert r.status_code == 502
        assert c.get("/health").json()["index_size"] == len(idx)


def test_load_settings_round_trip(tmp_path):
    p = tmp_path / "service.toml"
    p.write_text(
        """
bind_address = "127.0.0.1:9100"
max_question_chars = 500

[rate_limit]
requests_per_minute = 30
burst = 5

[embedder]
dim = 128

[generation]
max_tokens = 250
"""
    )
    settings = load_settings(str(p))
    assert settings.host == "127.0.0.1" and settings.port == 9100
    assert settings.config.max_question_chars == 500
    assert settings.config.rate_limit.burst == 5
    assert settings.config.embedder.dim == 128
    assert settings.config.generation.max_tokens == 250


def test_load_settings_rejects_bad_rate_limit(tmp_path):
    p = tmp_path / "service.toml"
    p.write_text("[rate_limit]\nrequests_per_minute = 0\n")
    with pytest.raises(ValueError):
        load_settings(str(p))
