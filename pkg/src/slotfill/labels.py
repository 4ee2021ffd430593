"""Slot label canonical form."""

from __future__ import annotations

import unicodedata


class LabelError(ValueError):
    pass


def canonicalize_label(raw: str) -> str:
    """Case-fold, turn punctuation (including ``_``) into spaces, collapse
    whitespace and render in Title Case.

    >>> canonicalize_label("reason_for_call ")
    'Reason For Call'
    """
    if not isinstance(raw, str):
        raise LabelError(f"label must be a string, got {type(raw).__name__}")
    folded = raw.casefold().replace("'", "").replace("’", "")
    spaced = "".join(" " if unicodedata.category(c)[0] in "PSZC" else c for c in folded)
    words = spaced.split()
    if not words:
        raise LabelError(f"empty slot label: {raw!r}")
    return " ".join(w[:1].upper() + w[1:] for w in words)
