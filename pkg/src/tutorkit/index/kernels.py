"""Hot numeric kernels for vector search.

Two implementations live side by side: numba-compiled kernels and pure-numpy
fallbacks. Set ``TUTORKIT_NO_NUMBA=1`` to force the fallback path (the flag is
read at import time). ``benchmarks/bench_kernels.py`` compares the two.
"""
from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("TUTORKIT_NO_NUMBA", "") not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


# --- exact scoring ---

def _score_all_numpy(mat: np.ndarray, q: np.ndarray) -> np.ndarray:
    return mat @ q


def _score_all_jit(mat, q):  # compiled below when numba is active
    n, d = mat.shape
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += mat[i, j] * q[j]
        out[i] = s
    return out


# --- graph beam search ---
# Greedy best-first search over a fixed neighbor graph. `nbrs` is an (n, cap)
# int32 array padded with -1. Returns up to `ef` (id, score) pairs, unsorted.

def _beam_search_python(mat, nbrs, q, ef, entries):
    import heapq

    visited = np.zeros(mat.shape[0], dtype=bool)
    candidates: list[tuple[float, int]] = []  # min-heap of (-score, id)
    results: list[tuple[float, int]] = []  # min-heap of (score, id)
    for e in entries:
        e = int(e)
        if visited[e]:
            continue
        visited[e] = True
        s = float(np.dot(mat[e], q))
        heapq.heappush(candidates, (-s, e))
        heapq.heappush(results, (s, e))
    while candidates:
        neg_s, cid = heapq.heappop(candidates)
        if len(results) >= ef and -neg_s < results[0][0]:
            break
        row = nbrs[cid]
        fresh = [int(nb) for nb in row if nb >= 0 and not visited[nb]]
        if not fresh:
            continue
        visited[fresh] = True
        scores = mat[fresh] @ q
        for nb, s in zip(fresh, scores):
            s = float(s)
            if len(results) < ef:
                heapq.heappush(results, (s, nb))
                heapq.heappush(candidates, (-s, nb))
            elif s > results[0][0]:
                heapq.heapreplace(results, (s, nb))
                heapq.heappush(candidates, (-s, nb))
    ids = np.array([i for _, i in results], dtype=np.int32)
    scores = np.array([s for s, _ in results], dtype=np.float64)
    return ids, scores


def _beam_search_jit(mat, nbrs, q, ef, entries):
    n, d = mat.shape
    visited = np.zeros(n, dtype=np.uint8)
    # candidate max-heap, scores negated so smaller-is-better
    csc = np.empty(n, dtype=np.float64)
    cid = np.empty(n, dtype=np.int32)
    cn = 0
    # result min-heap holding the best `ef` scores seen
    rsc = np.empty(ef, dtype=np.float64)
    rid = np.empty(ef, dtype=np.int32)
    rn = 0

    for e in entries:
        if visited[e]:
            continue
        visited[e] = 1
        s = 0.0
        for j in range(d):
            s += mat[e, j] * q[j]
        csc[cn] = -s
        cid[cn] = e
        i = cn
        cn += 1
        while i > 0:
            p = (i - 1) // 2
            if csc[i] < csc[p]:
                csc[i], csc[p] = csc[p], csc[i]
                cid[i], cid[p] = cid[p], cid[i]
                i = p
            else:
                break
        if rn < ef:
            rsc[rn] = s
            rid[rn] = e
            i = rn
            rn += 1
            while i > 0:
                p = (i - 1) // 2
                if rsc[i] < rsc[p]:
                    rsc[i], rsc[p] = rsc[p], rsc[i]
                    rid[i], rid[p] = rid[p], rid[i]
                    i = p
                else:
                    break

    while cn > 0:
        best_id = cid[0]
        best_s = -csc[0]
        cn -= 1
        csc[0] = csc[cn]
        cid[0] = cid[cn]
        i = 0
        while True:
            left = 2 * i + 1
            right = left + 1
            m = i
            if left < cn and csc[left] < csc[m]:
                m = left
            if right < cn and csc[right] < csc[m]:
                m = right
            if m == i:
                break
            csc[i], csc[m] = csc[m], csc[i]
            cid[i], cid[m] = cid[m], cid[i]
            i = m
        if rn >= ef and best_s < rsc[0]:
            break
        for t in range(nbrs.shape[1]):
            nb = nbrs[best_id, t]
            if nb < 0:
                break
            if visited[nb]:
                continue
            visited[nb] = 1
            s = 0.0
            for j in range(d):
                s += mat[nb, j] * q[j]
            if rn < ef or s > rsc[0]:
                csc[cn] = -s
                cid[cn] = nb
                i = cn
                cn += 1
                while i > 0:
                    p = (i - 1) // 2
                    if csc[i] < csc[p]:
                        csc[i], csc[p] = csc[p], csc[i]
                        cid[i], cid[p] = cid[p], cid[i]
                        i = p
                    else:
                        break
                if rn < ef:
                    rsc[rn] = s
                    rid[rn] = nb
                    i = rn
                    rn += 1
                    while i > 0:
                        p = (i - 1) // 2
                        if rsc[i] < rsc[p]:
                            rsc[i], rsc[p] = rsc[p], rsc[i]
                            rid[i], rid[p] = rid[p], rid[i]
                            i = p
                        else:
                            break
                else:
                    rsc[0] = s
                    rid[0] = nb
                    i = 0
                    while True:
                        left = 2 * i + 1
                        right = left + 1
                        m = i
                        if left < rn and rsc[left] < rsc[m]:
                            m = left
                        if right < rn and rsc[right] < rsc[m]:
                            m = right
                        if m == i:
                            break
                        rsc[i], rsc[m] = rsc[m], rsc[i]
                        rid[i], rid[m] = rid[m], rid[i]
                        i = m
    return rid[:rn].copy(), rsc[:rn].copy()


if USE_NUMBA:
    score_all = njit(cache=True)(_score_all_jit)
    beam_search = njit(cache=True)(_beam_search_jit)
else:
    score_all = _score_all_numpy
    beam_search = _beam_search_python
