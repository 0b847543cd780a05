import pytest

from factdial.errors import MissingPlaceholder
from factdial.prompts import TEMPLATES, TemplateName, render


def test_verify_template_contains_contract_lines():
    body = TEMPLATES[TemplateName.VERIFY].body
    assert "Output true if the statement is directly supported" in body
    assert "Output false if the statement is directly contradicted" in body
    assert 'output: "no enough information."' in body
    assert "Do not use your intern knowledge" in body


def test_reformulate_template_output_markers():
    body = TEMPLATES[TemplateName.REFORMULATE].body
    assert "resolving all pronouns and references" in body
    assert "**Chain of Thought**:" in body
    assert "**Resolved Dialogue**:" in body


def test_atomic_split_template_identity_clause():
    body = TEMPLATES[TemplateName.ATOMIC_SPLIT].body
    assert "output it exactly as it is" in body
    assert "split it into atomic sentences based only on the given information" in body
    assert "without adding any additional information" in body


def test_generate_template_slots():
    rendered = render(
        TemplateName.GENERATE,
        {"Selected Triples": "", "Dialogue Context": "Speaker A: hi", "Last Utterance": "hello"},
    )
    assert rendered.startswith("Knowledge: \n")
    assert "ensure the response is fluent and fact-consistent" in rendered
    assert "Input: hello" in rendered


def test_render_is_exact_substitution():
    out = render(
        TemplateName.VERIFY,
        {
            "Wikipedia Passages": "P",
            "Dialogue": "D",
            "Speaker": "Speaker B",
            "Atomic Fact": "F",
        },
    )
    assert "Evidence: P" in out
    assert "Dialogue history: D" in out
    assert "Statement: F" in out
    assert "{" not in out


def test_render_missing_placeholder():
    with pytest.raises(MissingPlaceholder) as exc:
        render(TemplateName.REFORMULATE, {})
    assert exc.value.name == "Dialogue"


def test_render_pure():
    bindings = {"Dialogue": "Speaker A: x"}
    a = render(TemplateName.REFORMULATE, bindings)
    b = render(TemplateName.REFORMULATE, bindings)
    assert a == b


def test_every_template_lists_its_placeholders():
    expected = {
        TemplateName.REFORMULATE: ["Dialogue"],
        TemplateName.RELEVANCE: ["Dialogue", "Selected Triples"],
        TemplateName.GENERATE: ["Selected Triples", "Dialogue Context", "Last Utterance"],
        TemplateName.ATOMIC_SPLIT: ["Response"],
        TemplateName.VERIFY: ["Wikipedia Passages", "Dialogue", "Speaker", "Atomic Fact"],
    }
    for name, slots in expected.items():
        assert TEMPLATES[name].placeholders() == slots
