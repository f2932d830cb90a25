"""Compare the compiled kernels against the pure-numpy fallback.

The kernel implementation is chosen at import time from the
TUTORKIT_NO_NUMBA environment variable, so each variant is timed in its own
subprocess. Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""
from __future__ import annotations

import json
import os
import subprocess
import sys
import textwrap

N = 5000
DIM = 256
QUERIES = 50
REPEATS = 5

_WORKER = textwrap.dedent(
    """
    import json, time
    import numpy as np
    from tutorkit.index import AnnParams, SearchMode, build, search, IndexEntry
    from tutorkit.index import kernels
    from tutorkit.embed import EmbeddingVector
    from tutorkit.chunker import ChunkMetadata

    n, dim, n_queries, repeats = {n}, {dim}, {queries}, {repeats}
    rng = np.random.default_rng(7)
    mat = rng.standard_normal((n, dim))
    mat /= np.linalg.norm(mat, axis=1, keepdims=True)
    queries = rng.standard_normal((n_queries, dim))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)

    meta = ChunkMetadata(topic_domain="t", source_ref="s")
    entries = [
        IndexEntry(
            chunk_id=f"c{{i:05d}}",
            vector=EmbeddingVector(tuple(map(float, mat[i])), dim, "m"),
            metadata=meta,
            body="",
        )
        for i in range(n)
    ]
    exact = build(entries, AnnParams(mode=SearchMode.EXACT))
    approx = build(entries, AnnParams(mode=SearchMode.APPROXIMATE))

    def bench(idx):
        qv = [EmbeddingVector(tuple(map(float, q)), dim, "m") for q in queries]
        search(idx, qv[0], 10)  # warm-up (includes any JIT compilation)
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            for v in qv:
                search(idx, v, 10)
            best = min(best, (time.perf_counter() - t0) / n_queries)
        return best * 1000

    print(json.dumps({{
        "uses_numba": kernels.USE_NUMBA,
        "exact_ms_per_query": bench(exact),
        "approx_ms_per_query": bench(approx),
    }}))
    """
)


def run_variant(no_numba: bool) -> dict:
    env = dict(os.environ)
    env["TUTORKIT_NO_NUMBA"] = "1" if no_numba else ""
    script = _WORKER.format(n=N, dim=DIM, queries=QUERIES, repeats=REPEATS)
    out = subprocess.run(
        [sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    print(f"corpus: {N} vectors, dim {DIM}; {QUERIES} queries, best of {REPEATS} rounds\n")
    rows = []
    for label, no_numba in (("numba", False), ("numpy-fallback", True)):
        r = run_variant(no_numba)
        assert r["uses_numba"] != no_numba, "kernel selection flag was not honored"
        rows.append((label, r))
        print(
            f"{label:>16}:  exact {r['exact_ms_per_query']:.3f} ms/query   "
            f"approx {r['approx_ms_per_query']:.3f} ms/query"
        )
    base, fast = rows[1][1], rows[0][1]
    print(
        f"\nspeedup (numba vs fallback):  exact "
        f"{base['exact_ms_per_query'] / fast['exact_ms_per_query']:.2f}x   "
        f"approx {base['approx_ms_per_query'] / fast['approx_ms_per_query']:.2f}x"
    )


if __name__ == "__main__":
    main()
