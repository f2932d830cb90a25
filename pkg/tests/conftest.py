"""Shared fixtures: a local stub for the embeddings/completions endpoints."""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from tutorkit.embed import _trigram_vector


class StubUpstream:
    """In-process HTTP stub speaking the embeddings and chat-completion wire shapes.

    Counts calls per route so tests can assert that rejected questions never
    reach an upstream endpoint.
    """

    DEFAULT_COMPLETION = "Use the torsion formula [1] to find the stress."

    def __init__(self):
        self.embed_calls = 0
        self.completion_calls = 0
        self.completion_bodies: list[dict] = []
        self.completion_text = self.DEFAULT_COMPLETION
        self.fail_with: int | None = None  # force this HTTP status on every call
        self.lock = threading.Lock()

        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                if stub.fail_with is not None:
                    self.send_response(stub.fail_with)
                    self.end_headers()
                    return
                if self.path == "/v1/embeddings":
                    with stub.lock:
                        stub.embed_calls += 1
                    dim = body.get("dimensions", 64)
                    data = []
                    for text in body["input"]:
                        vec = _trigram_vector(text, body.get("model", "stub"), dim)
                        data.append({"embedding": [float(v) for v in vec]})
                    payload = {"data": data}
                elif self.path == "/v1/chat/completions":
                    with stub.lock:
                        stub.completion_calls += 1
                        stub.completion_bodies.append(body)
                    payload = {
                        "choices": [{"message": {"content": stub.completion_text}}]
                    }
                else:
                    self.send_response(404)
                    self.end_headers()
                    return
                raw = json.dumps(payload).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def base_url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    @property
    def embeddings_url(self) -> str:
        return f"{self.base_url}/v1/embeddings"

    @property
    def completions_url(self) -> str:
        return f"{self.base_url}/v1/chat/completions"

    def reset(self):
        with self.lock:
            self.embed_calls = 0
            self.completion_calls = 0
            self.completion_bodies = []
            self.completion_text = self.DEFAULT_COMPLETION
            self.fail_with = None

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture(scope="session")
def stub_upstream():
    stub = StubUpstream()
    yield stub
    stub.close()


@pytest.fixture
def upstream(stub_upstream):
    stub_upstream.reset()
    return stub_upstream


@pytest.fixture
def api_key_env(monkeypatch):
    monkeypatch.setenv("TUTORKIT_TEST_KEY", "test-key-123")
    return "TUTORKIT_TEST_KEY"
