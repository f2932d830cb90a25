"""Command-line interface for the full pipeline.

Commands mirror the pipeline stages: ingest (merge extractor payloads),
chunk, index build/query, guardrail classify, eval filter/bench, serve.
"""
from __future__ import annotations

import json
import logging
import sys

import click

from . import index as vindex
from .chunker import ChunkPolicy, chunk_document, chunks_from_json, chunks_to_json
from .embed import Backend, EmbedderConfig, embed_texts
from .errors import TutorkitError
from .evalkit import BenchQuery, load_suite, run_filter_experiment, run_retrieval_bench
from .guardrail import classify as classify_question
from .guardrail import default_config, load_config
from .ingest import Document, merge_documents, parse_extraction

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib


@click.group()
def main() -> None:
    """Course-material retrieval and tutoring toolkit."""


def _write_out(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text)


@main.command()
@click.option("--doc-id", required=True)
@click.option("--title", default="")
@click.option("--pages", required=True, type=int)
@click.option("--source-path", default="")
@click.option("--out", default=None, help="Write merged Document JSON here instead of stdout.")
@click.argument("payloads", nargs=-1, required=True, type=click.Path(exists=True))
def ingest(doc_id, title, pages, source_path, out, payloads):
    """Merge extractor payload JSON files into one Document."""
    extractions = []
    total_dropped = 0
    for path in payloads:
        with open(path, "rb") as fh:
            blocks, dropped = parse_extraction(fh.read())
        total_dropped += dropped
        origin = blocks[0].origin if blocks else path
        extractions.append((origin, blocks))
    doc = merge_documents(
        extractions, doc_id=doc_id, title=title, source_path=source_path, pages=pages
    )
    if total_dropped:
        click.echo(f"warning: dropped {total_dropped} unusable block(s)", err=True)
    _write_out(doc.to_json(), out)


@main.command()
@click.option("--max-tokens", default=400, type=int)
@click.option("--overlap", default=50, type=int)
@click.option("--out", default=None)
@click.argument("merged", type=click.Path(exists=True))
def chunk(max_tokens, overlap, out, merged):
    """Split a merged Document into retrieval chunks (JSON array)."""
    with open(merged, encoding="utf-8") as fh:
        doc = Document.from_json(fh.read())
    policy = ChunkPolicy(max_chunk_tokens=max_tokens, overlap_tokens=overlap)
    _write_out(chunks_to_json(chunk_document(doc, policy)), out)


def _embedder_options(fn):
    fn = click.option("--dim", default=256, type=int)(fn)
    fn = click.option("--model-id", default="local-trigram")(fn)
    fn = click.option("--backend", default="deterministic_local",
                      type=click.Choice([b.value for b in Backend]))(fn)
    fn = click.option("--endpoint-url", default="")(fn)
    fn = click.option("--api-key-env", default="")(fn)
    return fn


def _embedder_from_options(backend, endpoint_url, api_key_env, model_id, dim) -> EmbedderConfig:
    return EmbedderConfig(
        backend=Backend(backend),
        endpoint_url=endpoint_url,
        api_key_env=api_key_env,
        model_id=model_id,
        dim=dim,
    )


@main.group()
def index() -> None:
    """Build and query the vector index."""


@index.command("build")
@click.option("--chunks", "chunks_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--approximate", is_flag=True, help="Build the nearest-neighbor graph too.")
@_embedder_options
def index_build(chunks_path, out, approximate, backend, endpoint_url, api_key_env, model_id, dim):
    """Embed a chunk file and persist the index."""
    with open(chunks_path, encoding="utf-8") as fh:
        chunks = chunks_from_json(fh.read())
    cfg = _embedder_from_options(backend, endpoint_url, api_key_env, model_id, dim)
    vectors = embed_texts(cfg, [c.body for c in chunks])
    entries = [
        vindex.IndexEntry(chunk_id=c.chunk_id, vector=v, metadata=c.metadata, body=c.body)
        for c, v in zip(chunks, vectors)
    ]
    mode = vindex.SearchMode.APPROXIMATE if approximate else vindex.SearchMode.EXACT
    idx = vindex.build(entries, vindex.AnnParams(mode=mode))
    with open(out, "wb") as fh:
        fh.write(vindex.save(idx))
    click.echo(f"indexed {len(idx)} chunks -> {out}")


@index.command("query")
@click.option("--idx", "idx_path", required=True, type=click.Path(exists=True))
@click.option("--k", default=5, type=int)
@_embedder_options
@click.argument("question")
def index_query(idx_path, k, backend, endpoint_url, api_key_env, model_id, dim, question):
    """Print the top-k retrieval results for a question as JSON."""
    with open(idx_path, "rb") as fh:
        idx = vindex.load(fh.read())
    cfg = _embedder_from_options(backend, endpoint_url, api_key_env, model_id, idx.dim)
    qvec = embed_texts(cfg, [question])[0]
    results = vindex.search(idx, qvec, k)
    click.echo(
        json.dumps(
            [
                {
                    "rank": r.rank,
                    "chunk_id": r.chunk_id,
                    "score": r.score,
                    "source_ref": r.source_ref,
                }
                for r in results
            ],
            indent=2,
        )
    )


@main.group()
def guardrail() -> None:
    """Domain-relevance classification."""


@guardrail.command("classify")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.argument("question")
def guardrail_classify(config_path, question):
    """Print the relevance verdict with its signal breakdown as JSON."""
    cfg = load_config(config_path) if config_path else default_config()
    verdict = classify_question(cfg, question)
    click.echo(json.dumps(verdict.to_dict(), indent=2, ensure_ascii=False))


@main.group(name="eval")
def eval_group() -> None:
    """Evaluation harnesses."""


@eval_group.command("filter")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--suite", "suite_path", default=None, type=click.Path(exists=True))
@click.option("--out", default=None)
def eval_filter(config_path, suite_path, out):
    """Run the question-filtering experiment and emit the report JSON."""
    cfg = load_config(config_path) if config_path else default_config()
    report = run_filter_experiment(cfg, load_suite(suite_path))
    _write_out(json.dumps(report.to_dict(), indent=2, ensure_ascii=False), out)
    cm = report.confusion
    click.echo(
        f"tp={cm.tp} fp={cm.fp} fn={cm.fn} tn={cm.tn} "
        + " ".join(f"{k}={v:.3f}" for k, v in report.metrics.items()),
        err=True,
    )


@eval_group.command("bench")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--queries", "queries_path", required=True, type=click.Path(exists=True))
@click.option("--backends", "backends_path", default=None, type=click.Path(exists=True),
              help="TOML with [[backends]] tables; defaults to the local embedder.")
@click.option("--k", default=5, type=int)
@click.option("--out", default=None)
def eval_bench(corpus_path, queries_path, backends_path, k, out):
    """Run the retrieval benchmark across embedding backends."""
    with open(corpus_path, encoding="utf-8") as fh:
        corpus = chunks_from_json(fh.read())
    with open(queries_path, encoding="utf-8") as fh:
        raw = json.load(fh)
    queries = [
        BenchQuery(text=q["text"], relevant_chunk_ids=frozenset(q["relevant_chunk_ids"]))
        for q in raw["queries"]
    ]
    if backends_path:
        with open(backends_path, "rb") as fh:
            raw = tomllib.load(fh)
        backends = [
            EmbedderConfig(
                backend=Backend(b.get("backend", "deterministic_local")),
                endpoint_url=b.get("endpoint_url", ""),
                api_key_env=b.get("api_key_env", ""),
                model_id=b.get("model_id", "local-trigram"),
                dim=b.get("dim", 256),
            )
            for b in raw["backends"]
        ]
    else:
        backends = [EmbedderConfig()]
    report = run_retrieval_bench(corpus, queries, backends, k=k)
    _write_out(json.dumps(report.to_dict(), indent=2), out)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def serve(config_path):
    """Run the HTTP service."""
    import uvicorn

    from .service import AppState, create_app, load_settings

    logging.basicConfig(level=logging.INFO)
    settings = load_settings(config_path)
    idx = None
    if settings.index_path:
        with open(settings.index_path, "rb") as fh:
            idx = vindex.load(fh.read())
    app = create_app(AppState(settings.config, idx))
    uvicorn.run(app, host=settings.host, port=settings.port, log_config=None)


def entrypoint() -> None:
    try:
        main(standalone_mode=True)
    except TutorkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    entrypoint()
