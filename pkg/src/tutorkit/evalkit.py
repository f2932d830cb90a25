"""Retrieval and classification metrics plus the two experiment harnesses.

Covers standard IR metrics (accuracy@k, MRR, NDCG@k with binary relevance),
precision/recall/F1/accuracy over a confusion matrix, a question-filtering
experiment driven by the guardrail, and a retrieval benchmark that embeds a
chunk corpus, builds an index per embedding backend, and scores known-answer
queries.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

from . import index as vindex
from .chunker import Chunk
from .embed import EmbedderConfig, embed_texts
from .errors import EmptyInput, EmptyQuestion, UndefinedMetric
from .guardrail import GuardrailConfig, RelevanceVerdict, classify


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class LabeledQuestion:
    id: str
    text: str
    category: str
    expected_relevant: bool


def classification_metrics(cm: ConfusionMatrix) -> dict[str, float]:
    if cm.total == 0:
        raise EmptyInput("confusion matrix is empty")
    if cm.tp + cm.fp == 0:
        raise UndefinedMetric("precision undefined: no positive predictions")
    if cm.tp + cm.fn == 0:
        raise UndefinedMetric("recall undefined: no positive labels")
    precision = cm.tp / (cm.tp + cm.fp)
    recall = cm.tp / (cm.tp + cm.fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    accuracy = (cm.tp + cm.tn) / cm.total
    return {"precision": precision, "recall": recall, "f1": f1, "accuracy": accuracy}


def mrr(first_relevant_ranks: Sequence[int]) -> float:
    """Mean reciprocal rank; rank 0 means the relevant item was absent."""
    if not first_relevant_ranks:
        raise EmptyInput("no rankings given")
    if any(r < 0 for r in first_relevant_ranks):
        raise ValueError("ranks must be >= 0")
    return sum(1.0 / r if r > 0 else 0.0 for r in first_relevant_ranks) / len(
        first_relevant_ranks
    )


def ndcg_at_k(relevant_ranks_per_query: Sequence[Sequence[int]], k: int) -> float:
    """Binary-relevance NDCG@k averaged over queries.

    Each inner sequence holds the ranks (1-based) at which that query's
    relevant items appeared. A query with no relevant items scores 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not relevant_ranks_per_query:
        raise EmptyInput("no queries given")
    total = 0.0
    for ranks in relevant_ranks_per_query:
        n_rel = len(ranks)
        if n_rel == 0:
            continue
        dcg = sum(1.0 / math.log2(r + 1) for r in ranks if 1 <= r <= k)
        idcg = sum(1.0 / math.log2(i + 1) for i in range(1, min(n_rel, k) + 1))
        total += dcg / idcg
    return total / len(relevant_ranks_per_query)


def accuracy_at_k(first_relevant_ranks: Sequence[int], k: int) -> float:
    if not first_relevant_ranks:
        raise EmptyInput("no rankings given")
    return sum(1 for r in first_relevant_ranks if 1 <= r <= k) / len(first_relevant_ranks)


# --- question-filtering experiment ---

@dataclass
class FilterReport:
    confusion: ConfusionMatrix
    metrics: dict[str, float]
    verdicts: dict[str, RelevanceVerdict]

    def to_dict(self) -> dict:
        return {
            "confusion_matrix": {
                "tp": self.confusion.tp,
                "fp": self.confusion.fp,
                "fn": self.confusion.fn,
                "tn": self.confusion.tn,
            },
            "metrics": self.metrics,
            "verdicts": {qid: v.to_dict() for qid, v in self.verdicts.items()},
        }


def load_suite(path: str | None = None) -> list[LabeledQuestion]:
    if path is None:
        raw = json.loads(
            resources.files("tutorkit.fixtures").joinpath("relevance_suite.json").read_text()
        )
    else:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    return [
        LabeledQuestion(
            id=q["id"],
            text=q["text"],
            category=q["category"],
            expected_relevant=q["expected_relevant"],
        )
        for q in raw["questions"]
    ]


def run_filter_experiment(cfg: GuardrailConfig, suite: Sequence[LabeledQuestion]) -> FilterReport:
    if not suite:
        raise EmptyInput("suite is empty")
    bad = [q.id for q in suite if not q.text.strip()]
    if bad:
        raise EmptyQuestion(f"suite contains empty questions: {bad}")
    tp = fp = fn = tn = 0
    verdicts: dict[str, RelevanceVerdict] = {}
    for q in suite:
        verdict = classify(cfg, q.text)
        verdicts[q.id] = verdict
        if q.expected_relevant and verdict.relevant:
            tp += 1
        elif q.expected_relevant:
            fn += 1
        elif verdict.relevant:
            fp += 1
        else:
            tn += 1
    cm = ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)
    return FilterReport(confusion=cm, metrics=classification_metrics(cm), verdicts=verdicts)


# --- retrieval benchmark ---

@dataclass(frozen=True)
class BenchQuery:
    text: str
    relevant_chunk_ids: frozenset[str]


@dataclass
class BenchRow:
    model_id: str
    dim: int
    accuracy_at_k: float
    mrr: float
    ndcg_at_k: float
    avg_top3_similarity: float
    mean_query_latency_s: float
    storage_kb: float
    error: str | None = None

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class RetrievalBenchReport:
    k: int
    rows: list[BenchRow] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"k": self.k, "rows": [r.to_dict() for r in self.rows]}


LATENCY_REPETITIONS = 20


def run_retrieval_bench(
    corpus: Sequence[Chunk],
    queries: Sequence[BenchQuery],
    backends: Sequence[EmbedderConfig],
    k: int = 5,
    ann_params: vindex.AnnParams = vindex.AnnParams(),
) -> RetrievalBenchReport:
    corpus_ids = {c.chunk_id for c in corpus}
    for q in queries:
        missing = q.relevant_chunk_ids - corpus_ids
        if missing:
            raise ValueError(f"query {q.text!r} references unknown chunks {missing}")
    report = RetrievalBenchReport(k=k)
    for cfg in backends:
        try:
            report.rows.append(_bench_one(corpus, queries, cfg, k, ann_params))
        except Exception as exc:  # per-row failure must not kill other rows
            report.rows.append(
                BenchRow(
                    model_id=cfg.model_id,
                    dim=cfg.dim,
                    accuracy_at_k=0.0,
                    mrr=0.0,
                    ndcg_at_k=0.0,
                    avg_top3_similarity=0.0,
                    mean_query_latency_s=0.0,
                    storage_kb=0.0,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return report


def _bench_one(
    corpus: Sequence[Chunk],
    queries: Sequence[BenchQuery],
    cfg: EmbedderConfig,
    k: int,
    ann_params: vindex.AnnParams,
) -> BenchRow:
    vectors = embed_texts(cfg, [c.body for c in corpus])
    entries = [
        vindex.IndexEntry(chunk_id=c.chunk_id, vector=v, metadata=c.metadata, body=c.body)
        for c, v in zip(corpus, vectors)
    ]
    idx = vindex.build(entries, ann_params)
    query_vectors = embed_texts(cfg, [q.text for q in queries])

    first_ranks: list[int] = []
    all_ranks: list[list[int]] = []
    top3_sims: list[float] = []
    for q, qv in zip(queries, query_vectors):
        results = vindex.search(idx, qv, k)
        hits = [r.rank for r in results if r.chunk_id in q.relevant_chunk_ids]
        first_ranks.append(hits[0] if hits else 0)
        all_ranks.append(hits)
        top3_sims.extend(r.score for r in results[:3])

    # Latency: warm once, then time repeated searches on the first query.
    qv = query_vectors[0]
    vindex.search(idx, qv, k)
    t0 = time.perf_counter()
    for _ in range(LATENCY_REPETITIONS):
        vindex.search(idx, qv, k)
    latency = (time.perf_counter() - t0) / LATENCY_REPETITIONS

    return BenchRow(
        model_id=cfg.model_id,
        dim=cfg.dim,
        accuracy_at_k=accuracy_at_k(first_ranks, k),
        mrr=mrr(first_ranks),
        ndcg_at_k=ndcg_at_k(all_ranks, k),
        avg_top3_similarity=sum(top3_sims) / len(top3_sims) if top3_sims else 0.0,
        mean_query_latency_s=latency,
        storage_kb=len(vindex.save(idx)) / 1024.0,
    )
