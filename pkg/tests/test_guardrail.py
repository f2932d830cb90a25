import pytest

from tutorkit.errors import EmptyQuestion
from tutorkit.evalkit import load_suite
from tutorkit.guardrail import (
    DEFAULT_REJECTION_MESSAGE,
    classify,
    default_config,
    detect_topics,
    load_config,
)


@pytest.fixture(scope="module")
def cfg():
    return default_config()


def test_default_config_shape(cfg):
    assert len(cfg.statics_keywords) == 30
    assert len(cfg.mechanics_keywords) == 34
    assert len(cfg.engineering_keywords) == 25
    assert len(cfg.exclusion_contexts) == 27
    assert len(cfg.coincidental_patterns) == 6
    assert len(cfg.units) == 31
    assert len(cfg.symbols) == 12
    assert len(cfg.formula_patterns) == 10
    assert cfg.threshold == 1.0


def test_empty_question_raises(cfg):
    with pytest.raises(EmptyQuestion):
        classify(cfg, "   ")
    with pytest.raises(EmptyQuestion):
        detect_topics(cfg, "")


def test_relevant_question_accepted(cfg):
    v = classify(cfg, "How do I compute the bending stress in a beam?")
    assert v.relevant
    assert v.rejection_message is None
    assert v.signals.keyword_hits


def test_irrelevant_question_rejected(cfg):
    v = classify(cfg, "What are the best travel destinations in Europe?")
    assert not v.relevant
    assert v.rejection_message == DEFAULT_REJECTION_MESSAGE


def test_exclusion_context_downweights(cfg):
    # "force" next to cooking-context words must not pass the gate.
    v = classify(cfg, "What pasta recipe needs the least torque when kneading?")
    assert not v.relevant
    assert "torque" in v.signals.keyword_hits
    assert set(v.signals.exclusion_hits) >= {"pasta", "recipe"}
    assert v.score < 0


def test_coincidental_pattern_masked(cfg):
    # "moment" as time, not mechanics.
    v = classify(cfg, "Can you wait a moment for me?")
    assert not v.relevant


def test_units_require_numeric_context(cfg):
    with_number = classify(cfg, "A load of 12 kN acts on the column base.")
    without = classify(cfg, "The kN is a unit I keep forgetting.")
    assert "kN" in with_number.signals.unit_hits
    assert "kN" not in without.signals.unit_hits


def test_symbols_latex_and_glyph(cfg):
    assert "tau" in classify(cfg, "Solve for \\tau in the shaft.").signals.symbol_hits
    assert "tau" in classify(cfg, "Find τ at the outer radius.").signals.symbol_hits


def test_verdict_serializes(cfg):
    d = classify(cfg, "what is shear stress").to_dict()
    assert set(d) == {"relevant", "score", "signals", "rejection_message"}


def test_detect_topics_families(cfg):
    topics = detect_topics(cfg, "Draw the shear force diagram and compute the bending stress")
    assert {"Statics", "Mechanics"} <= topics
    assert detect_topics(cfg, "tell me a story about dragons") == set()


def test_load_config_from_file(tmp_path, cfg):
    # The packaged default must load identically through the file path API.
    from importlib import resources

    raw = resources.files("tutorkit.fixtures").joinpath("guardrail_default.toml").read_bytes()
    p = tmp_path / "g.toml"
    p.write_bytes(raw)
    loaded = load_config(str(p))
    assert loaded == cfg


def test_packaged_suite_has_expected_shape():
    suite = load_suite()
    assert len(suite) == 80
    assert sum(q.expected_relevant for q in suite) == 20
    categories = {q.category for q in suite}
    assert len(categories) == 4
