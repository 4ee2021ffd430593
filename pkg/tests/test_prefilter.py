from __future__ import annotations

import json

import httpx
import pytest
from hypothesis import given, strategies as st

from slotfill.prefilter import (
    Candidate,
    ExtractorError,
    HttpExtractor,
    ReferenceExtractor,
    detect_abstractive,
    extract_candidates,
    narrow_labels,
)
from slotfill.registry import SlotRegistry


def _labels(cands):
    return {(c.label, c.value) for c in cands}


def test_account_number_candidate(registry):
    cands = extract_candidates("the account number is 123456", registry)
    assert ("Account Number", "123456") in _labels(cands)


def test_empty_text(registry):
    assert extract_candidates("", registry) == []


def test_email_span_is_exact(registry):
    text = "reach me at jane.doe@mail.com"
    (c,) = [c for c in extract_candidates(text, registry) if c.label == "Email"]
    assert c.value == "jane.doe@mail.com"
    assert text[c.start : c.end] == c.value


@pytest.mark.parametrize(
    "text, label, value",
    [
        ("pick it up at 4:30 PM?", "Appointment Time", "4:30 PM"),
        ("around seven thirty pm please", "Appointment Time", "seven thirty pm"),
        ("ready on March fifth.", "Appointment Date", "March fifth"),
        ("a charge of $49.99 today", "Amount", "$49.99"),
        ("call me at 555-867-5309.", "Phone Number", "555-867-5309"),
        ("it takes three weeks", "Duration", "three weeks"),
        ("I take 500 mg daily", "Dosage", "500 mg"),
        ("claim number is CL48213.", "Claim Number", "CL48213"),
        ("I'm John Doe, hi", "Customer Name", "John Doe"),
        ("calling Net Company today", "Company Name", "Net Company"),
    ],
)
def test_recognizers_route_to_labels(registry, text, label, value):
    assert (label, value) in _labels(extract_candidates(text, registry))


def test_min_score_and_label_subset(registry):
    text = "I'm John Doe, account 123456"
    only = extract_candidates(text, registry, labels=["Customer Name"])
    assert {c.label for c in only} == {"Customer Name"}
    assert all(c.score >= 0.8 for c in extract_candidates(text, registry, min_score=0.8))


def test_detect_abstractive(registry):
    assert detect_abstractive("My wifi doesn't   work", registry) == {"Reason For Call"}
    assert detect_abstractive("Good morning", registry) == set()


def test_abstractive_trigger_in_context_only(registry):
    window = "Customer: I want to file a claim\nAgent: Sure, one moment."
    assert "Reason For Call" in detect_abstractive(window, registry)


def test_narrow_labels_examples():
    cands = [Candidate("Company Name", "Net Company", 0, 11, 0.9)]
    assert narrow_labels(["Company Name", "Claim Number"], cands, set()) == ["Company Name"]
    assert narrow_labels(["Company Name"], [], set()) == []
    assert narrow_labels(["B", "A"], [Candidate("A", "x", 0, 1, 1.0)], {"B"}) == ["B", "A"]


def test_candidate_validation():
    with pytest.raises(ValueError):
        Candidate("A", "x", 0, 1, 1.5)
    with pytest.raises(ValueError):
        Candidate("A", "x", 3, 1, 0.5)


_label_pool = ["A", "B", "C", "D", "E"]
_cands = st.lists(st.builds(lambda lbl: Candidate(lbl, "v", 0, 1, 0.5), st.sampled_from(_label_pool + ["Z"])))


@given(st.lists(st.sampled_from(_label_pool), unique=True), _cands, st.sets(st.sampled_from(_label_pool)))
def test_narrowing_is_subset_and_ordered(requested, cands, hits):
    out = narrow_labels(requested, cands, hits)
    assert set(out) <= set(requested)
    assert out == [x for x in requested if x in out]


@given(st.lists(st.sampled_from(_label_pool), unique=True), _cands, st.sets(st.sampled_from(_label_pool)), _cands)
def test_narrowing_is_monotone(requested, cands, hits, more):
    assert set(narrow_labels(requested, cands, hits)) <= set(narrow_labels(requested, cands + more, hits))


_REGISTRY = SlotRegistry.from_config(
    [
        {"label": "Email", "constraints": [{"type": "entity_kind", "kind": "email"}]},
        {"label": "Count", "constraints": [{"type": "entity_kind", "kind": "cardinal"}]},
        {"label": "When", "constraints": [{"type": "entity_kind", "kind": "time"}]},
        {"label": "Day", "constraints": [{"type": "entity_kind", "kind": "date"}]},
        {"label": "Cost", "constraints": [{"type": "entity_kind", "kind": "money"}]},
        {"label": "Dose", "constraints": [{"type": "partial_cardinal"}]},
        {"label": "Phone", "constraints": [{"type": "entity_kind", "kind": "phone"}]},
        {"label": "Zip", "constraints": [{"type": "regex", "pattern": "us_zip"}]},
        {"label": "Name", "constraints": [{"type": "entity_kind", "kind": "person"}], "gazetteer": ["Ann Lee"]},
    ]
)
_words = st.sampled_from(
    ["call", "me", "at", "7", "pm", "seven", "$5", "a@b.io", "March", "5th", "Ann", "Lee", "555-123-4567", "12345",
     "mg", "500", ",", ".", "twenty", "two", "dollars", "weeks", "é", "\n"]
)


@given(st.lists(_words, max_size=15).map(" ".join))
def test_reference_spans_are_consistent(text):
    for c in ReferenceExtractor(_REGISTRY).extract(text):
        assert text[c.start : c.end] == c.value
        assert 0 <= c.score <= 1
        assert c.label in _REGISTRY


def test_http_extractor_reanchors_and_skips_bad_entities():
    text = "I'm John Doe"

    def handler(request):
        body = json.loads(request.content)
        assert body == {"text": text, "labels": ["Customer Name"]}
        return httpx.Response(
            200,
            json={
                "entities": [
                    {"label": "customer name", "text": "John Doe", "start": 0, "end": 8, "score": 0.7},
                    {"label": "x", "text": "absent", "start": 0, "end": 6},
                    {"label": "", "text": "John", "start": 4, "end": 8},
                ]
            },
        )

    ext = HttpExtractor("http://ner", client=httpx.Client(transport=httpx.MockTransport(handler)))
    (c,) = ext.extract(text, ["Customer Name"])
    assert (c.label, c.value, c.start, c.end) == ("Customer Name", "John Doe", 4, 12)


def test_http_extractor_errors():
    ext = HttpExtractor("http://ner", client=httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(503))))
    with pytest.raises(ExtractorError):
        ext.extract("x", ["A"])
