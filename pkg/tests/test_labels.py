from __future__ import annotations

import pytest
from hypothesis import assume, given, strategies as st

from slotfill.labels import LabelError, canonicalize_label


@pytest.mark.parametrize(
    "raw, canonical",
    [
        ("reason_for_call", "Reason For Call"),
        ("Reason for call", "Reason For Call"),
        ("  customer   NAME ", "Customer Name"),
        ("customer's name", "Customers Name"),
        ("e-mail", "E Mail"),
        ("shipping address", "Shipping Address"),
    ],
)
def test_canonical_label(raw, canonical):
    assert canonicalize_label(raw) == canonical


@pytest.mark.parametrize("raw", ["", "   ", "___", "?!"])
def test_empty_label_rejected(raw):
    with pytest.raises(LabelError):
        canonicalize_label(raw)


def test_non_string_rejected():
    with pytest.raises(LabelError):
        canonicalize_label(42)


@given(st.text(max_size=30))
def test_canonicalization_is_a_fixed_point(raw):
    try:
        once = canonicalize_label(raw)
    except LabelError:
        return
    assert canonicalize_label(once) == once


@given(st.text(alphabet="abcdefghij _-", max_size=20))
def test_case_and_separator_insensitive(raw):
    assume(any(c.isalpha() for c in raw))
    assert canonicalize_label(raw.upper()) == canonicalize_label(raw.replace("_", " "))
