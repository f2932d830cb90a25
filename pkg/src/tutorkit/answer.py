"""Prompt assembly, chat-completion calls, and citation validation.

Context chunks enter the prompt as numbered blocks ("[1] lec03:p2-p4: ...");
after generation every "[n]" marker in the model text is checked against the
actual context, deduplicated, and renumbered in first-use order. Markers
pointing outside the context are stripped and counted as violations instead
of failing the answer.
"""
from __future__ import annotations

import os
import re
import threading
import time
import uuid
from dataclasses import dataclass, field

from .errors import (
    AuthError,
    BudgetTooSmall,
    EmptyContext,
    ModelRefusal,
    TransportError,
)
from .embed import request_with_retry
from .index import RetrievalResult

DEFAULT_SYSTEM_PROMPT = (
    "You are a patient teaching assistant for a university course. "
    "Answer only from the provided course context. Guide the student through "
    "the method step by step instead of merely stating final answers, and "
    "cite the numbered context sources like [1] for every claim you take "
    "from them."
)

_MARKER_RE = re.compile(r"\[(\d+)\]")


@dataclass(frozen=True)
class GenerationConfig:
    endpoint_url: str = ""
    api_key_env: str = ""
    model_id: str = "gpt-4"
    max_tokens: int = 400
    temperature: float = 0.7
    presence_penalty: float = 0.1
    frequency_penalty: float = 0.1
    system_prompt_template: str = DEFAULT_SYSTEM_PROMPT
    context_token_budget: int = 2400
    max_history: int = 4
    timeout_s: float = 60.0


@dataclass(frozen=True)
class Citation:
    number: int
    chunk_id: str
    source_ref: str
    score: float


@dataclass(frozen=True)
class Answer:
    text: str
    citations: tuple[Citation, ...]
    rejected: bool
    session_id: str
    violations: int = 0


@dataclass
class Session:
    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    turns: list[tuple[str, Answer]] = field(default_factory=list)
    created_at: float = field(default_factory=time.time)
    max_turns: int = 100
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def append(self, question: str, answer: Answer) -> None:
        self.turns.append((question, answer))
        if len(self.turns) > self.max_turns:
            del self.turns[: len(self.turns) - self.max_turns]


@dataclass(frozen=True)
class ContextChunk:
    result: RetrievalResult
    body: str


def _token_len(text: str) -> int:
    return len(text.split())


def assemble_prompt(
    cfg: GenerationConfig,
    question: str,
    results: list[ContextChunk],
    history: Session | None = None,
) -> tuple[str, list[ContextChunk]]:
    """Build the full prompt; returns it with the context chunks that fit.

    Chunks are packed greedily in rank order, whole chunks only.
    """
    if not results:
        raise EmptyContext("no retrieval results to build a prompt from")
    ordered = sorted(results, key=lambda c: c.result.rank)
    included: list[ContextChunk] = []
    budget = cfg.context_token_budget
    for chunk in ordered:
        cost = _token_len(chunk.body)
        if cost <= budget:
            included.append(chunk)
            budget -= cost
    if not included:
        smallest = min(_token_len(c.body) for c in ordered)
        raise BudgetTooSmall(
            f"budget {cfg.context_token_budget} below smallest chunk ({smallest} tokens)"
        )
    lines = [cfg.system_prompt_template, "", "Course context:"]
    for n, chunk in enumerate(included, start=1):
        lines.append(f"[{n}] {chunk.result.source_ref}: {chunk.body}")
    if history is not None and history.turns:
        lines.append("")
        lines.append("Conversation so far:")
        for q, a in history.turns[-cfg.max_history :]:
            lines.append(f"Student: {q}")
            lines.append(f"Assistant: {a.text}")
    lines.append("")
    lines.append(f"Student question: {question}")
    return "\n".join(lines), included


def generate(cfg: GenerationConfig, prompt: str) -> str:
    """Call the chat-completion endpoint with the configured decoding settings."""
    if not prompt:
        raise ValueError("prompt is empty")
    api_key = os.environ.get(cfg.api_key_env, "")
    if not api_key:
        raise AuthError(f"environment variable {cfg.api_key_env} is not set")
    resp = request_with_retry(
        cfg.endpoint_url,
        headers={"Authorization": f"Bearer {api_key}"},
        body={
            "model": cfg.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": cfg.max_tokens,
            "temperature": cfg.temperature,
            "presence_penalty": cfg.presence_penalty,
            "frequency_penalty": cfg.frequency_penalty,
        },
        timeout_s=cfg.timeout_s,
    )
    if resp.status_code != 200:
        raise TransportError(f"HTTP {resp.status_code} from completion endpoint")
    payload = resp.json()
    try:
        text = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise TransportError("malformed completion response") from None
    if not text or not text.strip():
        raise ModelRefusal("completion endpoint returned an empty answer")
    return text


def validate_citations(
    text: str, context: list[ContextChunk], session_id: str = ""
) -> Answer:
    """Map "[n]" markers in model text onto the retrieval context.

    Valid markers are renumbered contiguously in first-use order and the text
    rewritten to match; out-of-range markers are removed and counted.
    """
    n_context = len(context)
    violations = 0
    renumber: dict[int, int] = {}

    def replace(match: re.Match) -> str:
        nonlocal violations
        n = int(match.group(1))
        if n < 1 or n > n_context:
            violations += 1
            return ""
        if n not in renumber:
            renumber[n] = len(renumber) + 1
        return f"[{renumber[n]}]"

    new_text = _MARKER_RE.sub(replace, text)
    citations = tuple(
        Citation(
            number=new,
            chunk_id=context[old - 1].result.chunk_id,
            source_ref=context[old - 1].result.source_ref,
            score=context[old - 1].result.score,
        )
        for old, new in sorted(renumber.items(), key=lambda kv: kv[1])
    )
    return Answer(
        text=new_text,
        citations=citations,
        rejected=False,
        session_id=session_id,
        violations=violations,
    )


def rejection_answer(message: str, session_id: str = "") -> Answer:
    return Answer(text=message, citations=(), rejected=True, session_id=session_id)
