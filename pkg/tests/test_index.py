import numpy as np
import pytest

from tutorkit import index as vindex
from tutorkit.chunker import ChunkMetadata
from tutorkit.embed import EmbeddingVector
from tutorkit.errors import (
    ChecksumError,
    DimensionMismatch,
    DuplicateChunkId,
    EmptyIndex,
    TruncatedFile,
    VersionMismatch,
)


def make_entries(n, dim=16, seed=0):
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((n, dim))
    mat /= np.linalg.norm(mat, axis=1, keepdims=True)
    meta = ChunkMetadata(topic_domain="Torsion", source_ref="doc:p1-p1")
    return [
        vindex.IndexEntry(
            chunk_id=f"chunk{i:04d}",
            vector=EmbeddingVector(tuple(map(float, mat[i])), dim, "m"),
            metadata=meta,
            body=f"body {i}",
        )
        for i in range(n)
    ]


def query_vec(dim=16, seed=99):
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(dim)
    q /= np.linalg.norm(q)
    return EmbeddingVector(tuple(map(float, q)), dim, "m")


def test_build_validation():
    with pytest.raises(EmptyIndex):
        vindex.build([])
    entries = make_entries(3)
    dup = entries + [entries[0]]
    with pytest.raises(DuplicateChunkId):
        vindex.build(dup)
    mixed = entries[:2] + make_entries(1, dim=8)
    with pytest.raises(DimensionMismatch):
        vindex.build(mixed)


def test_exact_search_matches_numpy_oracle():
    entries = make_entries(200)
    idx = vindex.build(entries)
    q = query_vec()
    results = vindex.search(idx, q, 10)
    sims = np.array([e.vector.as_array() @ q.as_array() for e in entries])
    oracle = np.argsort(-sims)[:10]
    assert [r.chunk_id for r in results] == [entries[i].chunk_id for i in oracle]
    for r, i in zip(results, oracle):
        assert r.score == pytest.approx(sims[i], abs=1e-9)
    assert [r.rank for r in results] == list(range(1, 11))


def test_search_k_larger_than_index():
    idx = vindex.build(make_entries(3))
    assert len(vindex.search(idx, query_vec(), 10)) == 3


def test_search_validation():
    idx = vindex.build(make_entries(3))
    with pytest.raises(DimensionMismatch):
        vindex.search(idx, query_vec(dim=8), 3)
    with pytest.raises(ValueError):
        vindex.search(idx, query_vec(), 0)


def test_unnormalized_query_is_normalized():
    idx = vindex.build(make_entries(50))
    q = query_vec()
    doubled = EmbeddingVector(tuple(2 * v for v in q.values), q.dim, "m")
    a = vindex.search(idx, q, 5)
    b = vindex.search(idx, doubled, 5)
    assert [r.chunk_id for r in a] == [r.chunk_id for r in b]


def test_tie_break_by_chunk_id():
    dim = 4
    v = EmbeddingVector((1.0, 0.0, 0.0, 0.0), dim, "m")
    meta = ChunkMetadata(topic_domain="t", source_ref="s")
    entries = [
        vindex.IndexEntry(chunk_id=cid, vector=v, metadata=meta, body="")
        for cid in ("bbb", "aaa", "ccc")
    ]
    idx = vindex.build(entries)
    results = vindex.search(idx, v, 3)
    assert [r.chunk_id for r in results] == ["aaa", "bbb", "ccc"]


def test_approximate_recall_on_small_corpus():
    entries = make_entries(500, dim=32)
    exact = vindex.build(entries)
    approx = vindex.build(entries, vindex.AnnParams(mode=vindex.SearchMode.APPROXIMATE))
    hits = 0
    for seed in range(20):
        q = query_vec(dim=32, seed=seed)
        want = {r.chunk_id for r in vindex.search(exact, q, 10)}
        got = {r.chunk_id for r in vindex.search(approx, q, 10)}
        hits += len(want & got)
    assert hits / (20 * 10) >= 0.95


def test_save_load_round_trip_bit_for_bit():
    idx = vindex.build(make_entries(60))
    data = vindex.save(idx)
    again = vindex.load(data)
    for seed in range(10):
        q = query_vec(seed=seed)
        a = vindex.search(idx, q, 5)
        b = vindex.search(again, q, 5)
        assert a == b  # dataclass equality: identical ids, scores, ranks


def test_load_rejects_bad_magic_and_version():
    data = vindex.save(vindex.build(make_entries(3)))
    with pytest.raises(VersionMismatch):
        vindex.load(b"XXXX" + data[4:])
    bad_version = data[:4] + (99).to_bytes(4, "little") + data[8:]
    with pytest.raises(VersionMismatch):
        vindex.load(bad_version)


def test_load_detects_corruption_and_truncation():
    data = vindex.save(vindex.build(make_entries(3)))
    corrupt = bytearray(data)
    corrupt[30] ^= 0xFF
    with pytest.raises(ChecksumError):
        vindex.load(bytes(corrupt))
    with pytest.raises(TruncatedFile):
        vindex.load(data[:-5])


def test_adaptive_k():
    assert vindex.adaptive_k(0) == 5
    assert vindex.adaptive_k(1) == 5
    assert vindex.adaptive_k(2) == 8
    assert vindex.adaptive_k(3) == 8
    assert vindex.adaptive_k(2, k_base=4, k_extra=2) == 6
