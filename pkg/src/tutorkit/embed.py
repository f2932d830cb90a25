"""Text embedding backends and vector similarity.

Two backends sit behind one call: a remote client speaking the common
embeddings wire shape (bearer auth, ``{"model", "input", "dimensions"}``)
and a deterministic local embedder that hashes character trigrams into a
fixed number of buckets, for offline runs and CI.
"""
from __future__ import annotations

import hashlib
import math
import os
import random
import time
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import requests

from .errors import AuthError, DimensionMismatch, TransportError, ZeroVector

DEFAULT_REMOTE_DIM = 3072
RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY_S = 0.25
RETRY_MAX_DELAY_S = 4.0


class Backend(str, Enum):
    REMOTE = "remote"
    DETERMINISTIC_LOCAL = "deterministic_local"


@dataclass(frozen=True)
class EmbedderConfig:
    backend: Backend = Backend.DETERMINISTIC_LOCAL
    endpoint_url: str = ""
    api_key_env: str = ""
    model_id: str = "local-trigram"
    dim: int = 256
    normalize: bool = True
    timeout_s: float = 30.0

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.backend is Backend.REMOTE and (not self.endpoint_url or not self.api_key_env):
            raise ValueError("remote backend requires endpoint_url and api_key_env")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int
    model_id: str

    def __post_init__(self):
        if len(self.values) != self.dim:
            raise DimensionMismatch(f"{len(self.values)} values for dim {self.dim}")
        if any(math.isnan(v) or math.isinf(v) for v in self.values):
            raise ValueError("vector contains NaN/Inf")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def normalized(self) -> "EmbeddingVector":
        n = self.norm()
        if n == 0.0:
            raise ZeroVector("cannot normalize the zero vector")
        return EmbeddingVector(tuple(v / n for v in self.values), self.dim, self.model_id)


def _trigram_vector(text: str, model_id: str, dim: int) -> np.ndarray:
    """Hash character 3-grams of the text into `dim` signed buckets."""
    padded = f"\x02{text.lower()}\x03"
    vec = np.zeros(dim, dtype=np.float64)
    for i in range(max(len(padded) - 2, 1)):
        gram = padded[i : i + 3]
        digest = hashlib.blake2b(
            gram.encode("utf-8"), key=model_id.encode("utf-8")[:64], digest_size=8
        ).digest()
        h = int.from_bytes(digest, "big")
        sign = 1.0 if h & 1 else -1.0
        vec[(h >> 1) % dim] += sign
    if not vec.any():
        vec[0] = 1.0
    return vec


def _embed_local(cfg: EmbedderConfig, texts: Sequence[str]) -> list[EmbeddingVector]:
    out = []
    for t in texts:
        arr = _trigram_vector(t, cfg.model_id, cfg.dim)
        if cfg.normalize:
            arr = arr / np.linalg.norm(arr)
        out.append(EmbeddingVector(tuple(float(v) for v in arr), cfg.dim, cfg.model_id))
    return out


def request_with_retry(url: str, headers: dict, body: dict, timeout_s: float) -> requests.Response:
    last_exc: Exception | None = None
    for attempt in range(RETRY_ATTEMPTS):
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=timeout_s)
        except requests.RequestException as exc:
            last_exc = exc
        else:
            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials (HTTP {resp.status_code})")
            if resp.status_code < 500:
                return resp
            last_exc = TransportError(f"HTTP {resp.status_code} from {url}")
        if attempt < RETRY_ATTEMPTS - 1:
            delay = min(RETRY_BASE_DELAY_S * 2**attempt, RETRY_MAX_DELAY_S)
            time.sleep(delay * (0.5 + random.random() / 2))
    raise TransportError(f"request to {url} failed after {RETRY_ATTEMPTS} attempts: {last_exc}")


def _embed_remote(cfg: EmbedderConfig, texts: Sequence[str]) -> list[EmbeddingVector]:
    api_key = os.environ.get(cfg.api_key_env, "")
    if not api_key:
        raise AuthError(f"environment variable {cfg.api_key_env} is not set")
    resp = request_with_retry(
        cfg.endpoint_url,
        headers={"Authorization": f"Bearer {api_key}"},
        body={"model": cfg.model_id, "input": list(texts), "dimensions": cfg.dim},
        timeout_s=cfg.timeout_s,
    )
    if resp.status_code != 200:
        raise TransportError(f"HTTP {resp.status_code} from embeddings endpoint")
    data = resp.json().get("data", [])
    if len(data) != len(texts):
        raise TransportError(f"endpoint returned {len(data)} vectors for {len(texts)} inputs")
    out = []
    for item in data:
        values = item["embedding"]
        if len(values) != cfg.dim:
            raise DimensionMismatch(f"endpoint returned dim {len(values)}, expected {cfg.dim}")
        vec = EmbeddingVector(tuple(float(v) for v in values), cfg.dim, cfg.model_id)
        if cfg.normalize:
            vec = vec.normalized()
        out.append(vec)
    return out


def embed_texts(cfg: EmbedderConfig, texts: Sequence[str]) -> list[EmbeddingVector]:
    """Embed texts in order; one vector per input text."""
    if not texts:
        raise ValueError("texts must be non-empty")
    if any(not t.strip() for t in texts):
        raise ValueError("every text must be non-empty")
    if cfg.backend is Backend.DETERMINISTIC_LOCAL:
        return _embed_local(cfg, texts)
    return _embed_remote(cfg, texts)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dims differ: {a.dim} vs {b.dim}")
    va, vb = a.as_array(), b.as_array()
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity undefined for the zero vector")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))
