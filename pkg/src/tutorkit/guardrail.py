"""Domain-relevance guardrail for incoming questions.

A layered lexical classifier: domain keyword vocabulary (three families),
contextual exclusions, coincidental-phrasing filters, and detectors for
measurement units, math symbols, and formula patterns. Signals combine into
a weighted score compared against a threshold; rejected questions get a
standardized message.

The shipped default vocabulary targets a statics / mechanics-of-materials
course and is user-replaceable per course via a TOML config file.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .errors import EmptyQuestion

DEFAULT_REJECTION_MESSAGE = (
    "This question appears to be outside the scope of this course. "
    "I can only help with topics covered in the course materials. "
    "Please ask about course-related concepts."
)

# Superscript digits folded to caret form before unit matching.
_SUPERSCRIPTS = {"²": "^2", "³": "^3", "⁴": "^4"}


@dataclass(frozen=True)
class Weights:
    keyword: float = 1.0
    unit: float = 0.5
    symbol: float = 0.5
    formula: float = 1.0
    exclusion: float = 1.5


@dataclass(frozen=True)
class GuardrailConfig:
    statics_keywords: tuple[str, ...]
    mechanics_keywords: tuple[str, ...]
    engineering_keywords: tuple[str, ...]
    exclusion_contexts: tuple[str, ...]
    coincidental_patterns: tuple[str, ...]
    units: tuple[str, ...]
    symbols: tuple[str, ...]
    formula_patterns: tuple[str, ...]
    weights: Weights = Weights()
    threshold: float = 1.0
    rejection_message: str = DEFAULT_REJECTION_MESSAGE


@dataclass(frozen=True)
class SignalHits:
    keyword_hits: tuple[str, ...]
    unit_hits: tuple[str, ...]
    symbol_hits: tuple[str, ...]
    formula_hits: tuple[str, ...]
    exclusion_hits: tuple[str, ...]


@dataclass(frozen=True)
class RelevanceVerdict:
    relevant: bool
    score: float
    signals: SignalHits
    rejection_message: str | None = None

    def to_dict(self) -> dict:
        return {
            "relevant": self.relevant,
            "score": self.score,
            "signals": {
                "keyword_hits": list(self.signals.keyword_hits),
                "unit_hits": list(self.signals.unit_hits),
                "symbol_hits": list(self.signals.symbol_hits),
                "formula_hits": list(self.signals.formula_hits),
                "exclusion_hits": list(self.signals.exclusion_hits),
            },
            "rejection_message": self.rejection_message,
        }


def load_config(path: str) -> GuardrailConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return _config_from_dict(raw)


def _config_from_dict(raw: dict) -> GuardrailConfig:
    w = raw.get("weights", {})
    return GuardrailConfig(
        statics_keywords=tuple(raw["statics_keywords"]),
        mechanics_keywords=tuple(raw["mechanics_keywords"]),
        engineering_keywords=tuple(raw["engineering_keywords"]),
        exclusion_contexts=tuple(raw["exclusion_contexts"]),
        coincidental_patterns=tuple(raw["coincidental_patterns"]),
        units=tuple(raw["units"]),
        symbols=tuple(raw["symbols"]),
        formula_patterns=tuple(raw["formula_patterns"]),
        weights=Weights(
            keyword=w.get("keyword", 1.0),
            unit=w.get("unit", 0.5),
            symbol=w.get("symbol", 0.5),
            formula=w.get("formula", 1.0),
            exclusion=w.get("exclusion", 1.5),
        ),
        threshold=raw.get("threshold", 1.0),
        rejection_message=raw.get("rejection_message", DEFAULT_REJECTION_MESSAGE),
    )


_default_config: GuardrailConfig | None = None


def default_config() -> GuardrailConfig:
    global _default_config
    if _default_config is None:
        data = resources.files("tutorkit.fixtures").joinpath("guardrail_default.toml").read_bytes()
        _default_config = _config_from_dict(tomllib.loads(data.decode("utf-8")))
    return _default_config


# Greek glyphs recognized for symbol entries; LaTeX commands (\tau) also match.
_GREEK = {
    "sigma": "σ",
    "tau": "τ",
    "epsilon": "ε",
    "theta": "θ",
    "phi": "φ",
    "delta": "δ",
    "pi": "π",
    "nu": "ν",
    "gamma": "γ",
    "omega": "ω",
    "rho": "ρ",
    "lambda": "λ",
}


def _normalize(text: str) -> str:
    out = text
    for sup, repl in _SUPERSCRIPTS.items():
        out = out.replace(sup, repl)
    return out.replace("×", "x").replace("−", "-")


def _keyword_spans(text_lower: str, keyword: str) -> list[tuple[int, int]]:
    parts = [re.escape(p) for p in re.split(r"[\s-]+", keyword.lower()) if p]
    # Trailing plural "s" is tolerated ("torques", "beams").
    pattern = r"(?<![\w-])" + r"[\s-]+".join(parts) + r"s?(?![\w])"
    return [m.span() for m in re.finditer(pattern, text_lower)]


def _coincidental_spans(cfg: GuardrailConfig, text_lower: str) -> list[tuple[int, int]]:
    spans = []
    for pat in cfg.coincidental_patterns:
        spans.extend(m.span() for m in re.finditer(pat, text_lower, re.IGNORECASE))
    return spans


def _inside(span: tuple[int, int], covers: list[tuple[int, int]]) -> bool:
    return any(span[0] >= c[0] and span[1] <= c[1] for c in covers)


def _collect_hits(cfg: GuardrailConfig, question: str) -> tuple[SignalHits, dict[str, list[str]]]:
    text = _normalize(question)
    lower = text.lower()
    masked = _coincidental_spans(cfg, lower)

    per_family: dict[str, list[str]] = {"Statics": [], "Mechanics": [], "GeneralEngineering": []}
    keyword_hits: list[str] = []
    families = (
        ("Statics", cfg.statics_keywords),
        ("Mechanics", cfg.mechanics_keywords),
        ("GeneralEngineering", cfg.engineering_keywords),
    )
    claimed: list[tuple[int, int]] = []
    for family, keywords in families:
        # Longer keywords first so "shear force" claims its span before "shear".
        for kw in sorted(keywords, key=len, reverse=True):
            for span in _keyword_spans(lower, kw):
                if _inside(span, masked) or _inside(span, claimed):
                    continue
                claimed.append(span)
                keyword_hits.append(kw)
                per_family[family].append(kw)

    unit_hits = []
    for unit in cfg.units:
        pattern = r"\d\s*" + re.escape(unit) + r"(?![\w^])"
        if re.search(pattern, text):
            unit_hits.append(unit)

    symbol_hits = []
    for name in cfg.symbols:
        glyph = _GREEK.get(name, name)
        if glyph in question or re.search(r"\\" + name + r"\b", question):
            symbol_hits.append(name)

    formula_hits = []
    for pat in cfg.formula_patterns:
        if re.search(pat, text):
            formula_hits.append(pat)

    exclusion_hits = []
    for ctx in cfg.exclusion_contexts:
        if _keyword_spans(lower, ctx):
            exclusion_hits.append(ctx)

    hits = SignalHits(
        keyword_hits=tuple(keyword_hits),
        unit_hits=tuple(unit_hits),
        symbol_hits=tuple(symbol_hits),
        formula_hits=tuple(formula_hits),
        exclusion_hits=tuple(exclusion_hits),
    )
    return hits, per_family


def classify(cfg: GuardrailConfig, question: str) -> RelevanceVerdict:
    if not question or not question.strip():
        raise EmptyQuestion("question is empty")
    hits, _ = _collect_hits(cfg, question)
    w = cfg.weights
    score = (
        w.keyword * len(hits.keyword_hits)
        + w.unit * len(hits.unit_hits)
        + w.symbol * len(hits.symbol_hits)
        + w.formula * len(hits.formula_hits)
        - w.exclusion * len(hits.exclusion_hits)
    )
    relevant = score >= cfg.threshold
    return RelevanceVerdict(
        relevant=relevant,
        score=score,
        signals=hits,
        rejection_message=None if relevant else cfg.rejection_message,
    )


def detect_topics(cfg: GuardrailConfig, question: str) -> set[str]:
    """Topic families with at least one surviving keyword hit."""
    if not question or not question.strip():
        raise EmptyQuestion("question is empty")
    _, per_family = _collect_hits(cfg, question)
    return {family for family, kws in per_family.items() if kws}
