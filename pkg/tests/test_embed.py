import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tutorkit.embed import (
    Backend,
    EmbedderConfig,
    EmbeddingVector,
    cosine_similarity,
    embed_texts,
)
from tutorkit.errors import AuthError, DimensionMismatch, TransportError, ZeroVector


def test_config_validation():
    with pytest.raises(ValueError):
        EmbedderConfig(dim=0)
    with pytest.raises(ValueError):
        EmbedderConfig(backend=Backend.REMOTE)  # needs endpoint + key env


def test_vector_validation():
    with pytest.raises(DimensionMismatch):
        EmbeddingVector((1.0, 2.0), 3, "m")
    with pytest.raises(ValueError):
        EmbeddingVector((float("nan"), 0.0), 2, "m")


def test_normalize_zero_vector():
    with pytest.raises(ZeroVector):
        EmbeddingVector((0.0, 0.0), 2, "m").normalized()


def test_local_embedding_deterministic():
    cfg = EmbedderConfig(dim=64)
    a = embed_texts(cfg, ["torsion of shafts"])[0]
    b = embed_texts(cfg, ["torsion of shafts"])[0]
    assert a.values == b.values
    assert math.isclose(a.norm(), 1.0, abs_tol=1e-9)


def test_local_embedding_model_dependent():
    a = embed_texts(EmbedderConfig(dim=64, model_id="m1"), ["same text"])[0]
    b = embed_texts(EmbedderConfig(dim=64, model_id="m2"), ["same text"])[0]
    assert a.values != b.values


def test_similar_texts_score_higher():
    cfg = EmbedderConfig(dim=256)
    base, near, far = embed_texts(
        cfg,
        [
            "shear stress in a circular shaft",
            "shear stress in circular shafts",
            "the history of renaissance painting",
        ],
    )
    assert cosine_similarity(base, near) > cosine_similarity(base, far)


def test_embed_rejects_empty_inputs():
    cfg = EmbedderConfig(dim=8)
    with pytest.raises(ValueError):
        embed_texts(cfg, [])
    with pytest.raises(ValueError):
        embed_texts(cfg, ["ok", "  "])


def test_cosine_errors():
    a = EmbeddingVector((1.0, 0.0), 2, "m")
    b = EmbeddingVector((1.0, 0.0, 0.0), 3, "m")
    with pytest.raises(DimensionMismatch):
        cosine_similarity(a, b)
    with pytest.raises(ZeroVector):
        cosine_similarity(a, EmbeddingVector((0.0, 0.0), 2, "m"))


@settings(max_examples=50, deadline=None)
@given(st.text(min_size=1).filter(lambda s: s.strip()), st.sampled_from([16, 64, 256]))
def test_property_local_vectors_unit_norm(text, dim):
    vec = embed_texts(EmbedderConfig(dim=dim), [text])[0]
    assert math.isclose(np.linalg.norm(vec.as_array()), 1.0, abs_tol=1e-9)


def remote_cfg(url, dim=32):
    return EmbedderConfig(
        backend=Backend.REMOTE,
        endpoint_url=url,
        api_key_env="TUTORKIT_TEST_KEY",
        model_id="stub-model",
        dim=dim,
    )


def test_remote_backend_round_trip(upstream, api_key_env):
    cfg = remote_cfg(upstream.embeddings_url)
    vecs = embed_texts(cfg, ["first text", "second text"])
    assert len(vecs) == 2
    assert all(v.dim == 32 for v in vecs)
    assert upstream.embed_calls == 1


def test_remote_backend_missing_key(upstream, monkeypatch):
    monkeypatch.delenv("TUTORKIT_TEST_KEY", raising=False)
    with pytest.raises(AuthError):
        embed_texts(remote_cfg(upstream.embeddings_url), ["text"])


def test_remote_backend_server_error(upstream, api_key_env, monkeypatch):
    import tutorkit.embed as embed_mod

    monkeypatch.setattr(embed_mod, "RETRY_BASE_DELAY_S", 0.001)
    upstream.fail_with = 500
    with pytest.raises(TransportError):
        embed_texts(remote_cfg(upstream.embeddings_url), ["text"])


def test_remote_backend_auth_rejected(upstream, api_key_env):
    upstream.fail_with = 401
    with pytest.raises(AuthError):
        embed_texts(remote_cfg(upstream.embeddings_url), ["text"])
