"""Inverse text normalization for slot values.

Spoken-form numbers, clock times, dates and money amounts are rewritten into a
written canonical form so that surface variants of the same value compare
equal. Canonical forms:

- cardinals and ordinals: digits (``"one hundred twenty three"`` -> ``"123"``)
- clock times: 24-hour ``HH:MM``
- full dates: ``YYYY-MM-DD``; day+month without a year: ``--MM-DD``
- money: ``$N`` or ``$N.CC``

Every rewrite maps canonical output onto itself, so ``apply_itn`` is idempotent.
"""

from __future__ import annotations

import datetime
import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache

KINDS = frozenset({"time", "date", "number", "money", "duration", "email", "plain"})

# fmt: off
_ONES = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
    "thirteen": 13, "fourteen": 14, "fifteen": 15, "sixteen": 16,
    "seventeen": 17, "eighteen": 18, "nineteen": 19,
}
_TENS = {
    "twenty": 20, "thirty": 30, "forty": 40, "fifty": 50, "sixty": 60,
    "seventy": 70, "eighty": 80, "ninety": 90,
}
_ORDINAL_ONES = {
    "first": 1, "second": 2, "third": 3, "fourth": 4, "fifth": 5, "sixth": 6,
    "seventh": 7, "eighth": 8, "ninth": 9, "tenth": 10, "eleventh": 11,
    "twelfth": 12, "thirteenth": 13, "fourteenth": 14, "fifteenth": 15,
    "sixteenth": 16, "seventeenth": 17, "eighteenth": 18, "nineteenth": 19,
}
_ORDINAL_TENS = {
    "twentieth": 20, "thirtieth": 30, "fortieth": 40, "fiftieth": 50,
    "sixtieth": 60, "seventieth": 70, "eightieth": 80, "ninetieth": 90,
}
_MONTHS = {
    "january": 1, "jan": 1, "february": 2, "feb": 2, "march": 3, "mar": 3,
    "april": 4, "apr": 4, "may": 5, "june": 6, "jun": 6, "july": 7, "jul": 7,
    "august": 8, "aug": 8, "september": 9, "sep": 9, "sept": 9,
    "october": 10, "oct": 10, "november": 11, "nov": 11, "december": 12,
    "dec": 12,
}
# fmt: on
_DIGIT_WORDS = {w: v for w, v in _ONES.items() if v < 10}
# Too common as plain words to rewrite outside a date.
_AMBIGUOUS_ORDINALS = frozenset({"first", "second"})

_DOLLAR_WORDS = frozenset({"dollar", "dollars", "buck", "bucks"})
_CENT_WORDS = frozenset({"cent", "cents"})
_DURATION_UNITS = frozenset(
    {
        "second", "seconds", "minute", "minutes", "hour", "hours", "day", "days",
        "week", "weeks", "month", "months", "year", "years",
    }
)

EMAIL_RE = re.compile(
    r"[a-z0-9._%+\-]+@[a-z0-9\-]+(?:\.[a-z0-9\-]+)*\.[a-z]{2,}", re.IGNORECASE | re.ASCII
)
_CLOCK_RE = re.compile(r"([0-9]{1,2}):([0-9]{2})")
_CANON_TIME_RE = re.compile(r"(?:[01][0-9]|2[0-3]):[0-5][0-9]")
_ISO_DATE_RE = re.compile(r"([0-9]{4})-([0-9]{1,2})-([0-9]{1,2})")
_MONTH_DAY_RE = re.compile(r"--([0-9]{2})-([0-9]{2})")
_MONTH_DAY_SPAN_RE = re.compile(r"(?<!\S)--[0-9]{2}-[0-9]{2}(?!\S)")
_SLASH_DATE_RE = re.compile(r"(?<![0-9/])([0-9]{1,2})/([0-9]{1,2})/([0-9]{4})(?![0-9/])")
_MONEY_RE = re.compile(r"\$([0-9]+)(?:\.([0-9]{1,2}))?")
_DECIMAL_RE = re.compile(r"[0-9]+(?:\.[0-9]{1,2})?")
_NUMBER_TOKEN_RE = re.compile(r"[0-9]+(?:\.[0-9]+)?")
_DIGIT_ORDINAL_RE = re.compile(r"([0-9]+)(?:st|nd|rd|th)")
_GLUED_MERIDIEM_RE = re.compile(r"\b([0-9]{1,2}(?::[0-9]{2})?)([ap]m)\b", re.IGNORECASE)
_MAX_PASSES = 8
_APOSTROPHES = "'’‘`´"

_Tok = tuple[str, str]  # (normalized form, original surface)


@dataclass(frozen=True)
class NormalizedValue:
    surface: str
    canonical: str
    kinds: frozenset[str]


# ---------------------------------------------------------------------------
# numbers


def _below_hundred(words: list[str], i: int) -> tuple[int, int, bool] | None:
    """Parse 0-99 (cardinal or ordinal) at ``i``; returns (value, end, is_ordinal)."""
    if i >= len(words):
        return None
    w = words[i]
    if w in _TENS:
        nxt = words[i + 1] if i + 1 < len(words) else None
        if nxt in _DIGIT_WORDS and _DIGIT_WORDS[nxt] > 0:
            return _TENS[w] + _DIGIT_WORDS[nxt], i + 2, False
        if nxt in _ORDINAL_ONES and _ORDINAL_ONES[nxt] < 10:
            return _TENS[w] + _ORDINAL_ONES[nxt], i + 2, True
        return _TENS[w], i + 1, False
    if w in _ORDINAL_TENS:
        return _ORDINAL_TENS[w], i + 1, True
    if w in _ONES:
        return _ONES[w], i + 1, False
    if w in _ORDINAL_ONES:
        return _ORDINAL_ONES[w], i + 1, True
    return None


def _skip_and(words: list[str], j: int) -> int:
    if j < len(words) and words[j] == "and":
        nxt = _below_hundred(words, j + 1)
        if nxt is not None and nxt[0] > 0:
            return j + 1
    return j


def _below_thousand(words: list[str], i: int) -> tuple[int, int, bool] | None:
    n = len(words)
    if words[i] == "a" and i + 1 < n and words[i + 1] in ("hundred", "thousand"):
        base, j, ordinal = 1, i + 1, False
    else:
        head = _below_hundred(words, i)
        if head is None:
            return None
        base, j, ordinal = head
        if ordinal:
            return head
    if j < n and words[j] == "hundred" and 1 <= base <= 99:
        value = base * 100
        j += 1
        rest = _below_hundred(words, _skip_and(words, j))
        if rest is not None and rest[0] > 0:
            return value + rest[0], rest[1], rest[2]
        return value, j, False
    if words[i] == "a" and words[j] != "thousand":
        return None
    return base, j, False


def _cardinal(words: list[str], i: int) -> tuple[int, int, bool] | None:
    head = _below_thousand(words, i)
    if head is None:
        return None
    value, j, ordinal = head
    if not ordinal and j < len(words) and words[j] == "thousand" and value >= 1:
        value *= 1000
        j += 1
        k = _skip_and(words, j)
        rest = _below_thousand(words, k) if k < len(words) else None
        if rest is not None and rest[0] > 0:
            return value + rest[0], rest[1], rest[2]
        return value, j, False
    return value, j, ordinal


def _match_number(words: list[str], i: int) -> tuple[str, int] | None:
    w = words[i]
    m = _DIGIT_ORDINAL_RE.fullmatch(w)
    if m:
        return m.group(1), i + 1
    # digit-by-digit readings: "one two three" -> "123"
    if w in _DIGIT_WORDS and i + 1 < len(words) and words[i + 1] in _DIGIT_WORDS:
        j = i
        while j < len(words) and words[j] in _DIGIT_WORDS:
            j += 1
        return "".join(str(_DIGIT_WORDS[x]) for x in words[i:j]), j
    parsed = _cardinal(words, i)
    if parsed is None:
        return None
    value, j, _ = parsed
    if j == i + 1 and w in _AMBIGUOUS_ORDINALS:
        return None
    return str(value), j


def _numbers_pass(toks: list[_Tok]) -> list[_Tok]:
    words = [t[0] for t in toks]
    out: list[_Tok] = []
    i = 0
    while i < len(toks):
        m = _match_number(words, i)
        if m is None:
            out.append(toks[i])
            i += 1
            continue
        digits, j = m
        out.append((digits, " ".join(s for _, s in toks[i:j])))
        i = j
    return out


# ---------------------------------------------------------------------------
# times


def _int_token(tok: str, lo: int, hi: int, max_len: int = 2) -> int | None:
    if tok.isascii() and tok.isdigit() and len(tok) <= max_len:
        v = int(tok)
        if lo <= v <= hi:
            return v
    return None


def _meridiem_at(words: list[str], i: int) -> tuple[str, int] | None:
    if i >= len(words):
        return None
    t = words[i].replace(".", "")
    if t in ("am", "pm"):
        return t, i + 1
    if t in ("a", "p") and i + 1 < len(words) and words[i + 1].replace(".", "") == "m":
        return t + "m", i + 2
    return None


def _oclock_at(words: list[str], i: int) -> int | None:
    if i < len(words) and _strip_apostrophes(words[i]) == "oclock":
        return i + 1
    if i + 1 < len(words) and words[i] == "o" and words[i + 1] == "clock":
        return i + 2
    return None


def _clock(hour: int, minute: int, meridiem: str | None) -> str:
    if meridiem is not None:
        hour = hour % 12 + (12 if meridiem == "pm" else 0)
    return f"{hour:02d}:{minute:02d}"


def _match_time(words: list[str], i: int) -> tuple[str, int] | None:
    w = words[i]
    m = _CLOCK_RE.fullmatch(w)
    if m:
        hour, minute = int(m.group(1)), int(m.group(2))
        if minute > 59:
            return None
        mer = _meridiem_at(words, i + 1)
        if mer is not None and 1 <= hour <= 12:
            return _clock(hour, minute, mer[0]), mer[1]
        if hour <= 23:
            return _clock(hour, minute, None), i + 1
        return None
    hour = _int_token(w, 0, 23)
    if hour is None:
        return None
    k = i + 1
    minute = 0
    if k < len(words) and len(words[k]) == 2 and _int_token(words[k], 0, 59) is not None:
        minute, k = int(words[k]), k + 1
    elif k + 1 < len(words) and words[k] == "oh" and _int_token(words[k + 1], 0, 9, 1) is not None:
        minute, k = int(words[k + 1]), k + 2
    oclock = _oclock_at(words, k) if minute == 0 and k == i + 1 else None
    if oclock is not None:
        k = oclock
    mer = _meridiem_at(words, k)
    if mer is not None and 1 <= hour <= 12:
        return _clock(hour, minute, mer[0]), mer[1]
    if oclock is not None:
        return _clock(hour, 0, None), k
    return None


def _times_pass(toks: list[_Tok]) -> list[_Tok]:
    return _rewrite_pass(toks, _match_time)


# ---------------------------------------------------------------------------
# dates


def _day_at(words: list[str], i: int) -> tuple[int, int] | None:
    if i >= len(words):
        return None
    if words[i] in _AMBIGUOUS_ORDINALS:
        return _ORDINAL_ONES[words[i]], i + 1
    d = _int_token(words[i], 1, 31)
    return (d, i + 1) if d is not None else None


def _year_at(words: list[str], i: int) -> tuple[int, int] | None:
    if i < len(words):
        y = _int_token(words[i], 1900, 2099, 4)
        if y is not None and len(words[i]) == 4:
            return y, i + 1
        if words[i] in ("19", "20") and i + 1 < len(words) and len(words[i + 1]) == 2:
            tail = _int_token(words[i + 1], 0, 99)
            if tail is not None:
                return int(words[i]) * 100 + tail, i + 2
    return None


def _render_date(year: int | None, month: int, day: int) -> str | None:
    try:
        datetime.date(year if year is not None else 2000, month, day)
    except ValueError:
        return None
    if year is None:
        return f"--{month:02d}-{day:02d}"
    return f"{year:04d}-{month:02d}-{day:02d}"


def _match_date(words: list[str], i: int) -> tuple[str, int] | None:
    n = len(words)
    iso = _ISO_DATE_RE.fullmatch(words[i])
    if iso:
        y, mo, d = (int(g) for g in iso.groups())
        if 1000 <= y:
            canon = _render_date(y, mo, d) if 1 <= mo <= 12 else None
            return (canon, i + 1) if canon else None
        return None
    # month [the] day [year]
    if words[i] in _MONTHS:
        k = i + 1
        if k < n and words[k] == "the":
            k += 1
        day = _day_at(words, k)
        if day is None:
            return None
        year = _year_at(words, day[1])
        end = year[1] if year else day[1]
        canon = _render_date(year[0] if year else None, _MONTHS[words[i]], day[0])
        return (canon, end) if canon else None
    # [the] day [of] month [year]
    k = i + 1 if words[i] == "the" else i
    day = _day_at(words, k)
    if day is None:
        return None
    k = day[1]
    if k < n and words[k] == "of":
        k += 1
    if k >= n or words[k] not in _MONTHS:
        return None
    month = _MONTHS[words[k]]
    year = _year_at(words, k + 1)
    end = year[1] if year else k + 1
    canon = _render_date(year[0] if year else None, month, day[0])
    return (canon, end) if canon else None


def _dates_pass(toks: list[_Tok]) -> list[_Tok]:
    return _rewrite_pass(toks, _match_date)


# ---------------------------------------------------------------------------
# money


def _render_money(dollars: int, cents: int) -> str:
    return f"${dollars}" if cents == 0 else f"${dollars}.{cents:02d}"


def _cents_of(frac: str | None) -> int:
    if not frac:
        return 0
    return int(frac) * 10 if len(frac) == 1 else int(frac)


def _match_money(words: list[str], i: int) -> tuple[str, int] | None:
    n = len(words)
    w = words[i]
    m = _MONEY_RE.fullmatch(w)
    dec = _DECIMAL_RE.fullmatch(w)
    if m:
        dollars, cents = int(m.group(1)), _cents_of(m.group(2))
        k = i + 1
        if k < n and words[k] in _DOLLAR_WORDS:
            k += 1
    elif dec and i + 1 < n and words[i + 1] in _DOLLAR_WORDS:
        whole, _, frac = w.partition(".")
        dollars, cents, k = int(whole), _cents_of(frac), i + 2
    elif _int_token(w, 0, 99) is not None and i + 1 < n and words[i + 1] in _CENT_WORDS:
        return _render_money(0, int(w)), i + 2
    else:
        return None
    if cents == 0:
        j = k + 1 if k < n and words[k] == "and" else k
        if j + 1 < n and words[j + 1] in _CENT_WORDS:
            c = _int_token(words[j], 0, 99)
            if c is not None:
                cents, k = c, j + 2
    return _render_money(dollars, cents), k


def _money_pass(toks: list[_Tok]) -> list[_Tok]:
    return _rewrite_pass(toks, _match_money)


# ---------------------------------------------------------------------------
# shared plumbing


def _rewrite_pass(toks: list[_Tok], matcher) -> list[_Tok]:
    words = [t[0] for t in toks]
    out: list[_Tok] = []
    i = 0
    while i < len(toks):
        m = matcher(words, i)
        if m is None:
            out.append(toks[i])
            i += 1
        else:
            canon, j = m
            out.append((canon, canon))
            i = j
    return out


def _strip_apostrophes(s: str) -> str:
    return s.translate({ord(c): None for c in _APOSTROPHES})


def _fold(text: str) -> str:
    for _ in range(4):
        folded = unicodedata.normalize("NFKC", unicodedata.normalize("NFKC", text).casefold())
        if folded == text:
            break
        text = folded
    return text


def _keep_char(s: str, idx: int, protected: set[int]) -> bool:
    c = s[idx]
    if c.isalnum() or c.isspace() or idx in protected:
        return True
    prev_digit = idx > 0 and "0" <= s[idx - 1] <= "9"
    next_digit = idx + 1 < len(s) and "0" <= s[idx + 1] <= "9"
    if c in ":.-":
        return prev_digit and next_digit
    if c == "$":
        return next_digit
    return False


def _strip_punctuation(text: str) -> str:
    text = _SLASH_DATE_RE.sub(_slash_to_iso, text)
    text = text.replace("&", " and ")
    text = _strip_apostrophes(text)
    text = re.sub(r"(?<=[0-9]),(?=[0-9]{3}\b)", "", text)
    text = re.sub(r"\$\s+(?=[0-9])", "$", text)
    text = _GLUED_MERIDIEM_RE.sub(r"\1 \2", text)
    protected = {i for m in _MONTH_DAY_SPAN_RE.finditer(text) for i in range(m.start(), m.end())}
    return "".join(c if _keep_char(text, i, protected) else " " for i, c in enumerate(text))


def _slash_to_iso(m: re.Match) -> str:
    month, day, year = int(m.group(1)), int(m.group(2)), int(m.group(3))
    if 1 <= month <= 12:
        canon = _render_date(year, month, day)
        if canon:
            return canon
    return m.group(0)


def _tokens(text: str) -> list[_Tok]:
    """Whitespace tokens as (casefolded, surface) pairs; number-word compounds split on hyphens."""
    out: list[_Tok] = []
    for tok in text.split():
        parts = tok.split("-")
        if len(parts) > 1 and all(_fold(p) in _ONES or _fold(p) in _TENS or _fold(p) in _ORDINAL_ONES for p in parts):
            out.extend((_fold(p), p) for p in parts)
        else:
            out.append((_fold(tok), tok))
    return out


def normalize_number(text: str) -> str:
    """Rewrite spelled-out cardinals (0-999,999), spelled ordinals and digit
    ordinals such as ``3rd`` as digits.

    Input is treated as whitespace-tokenized; tokens that are not part of a
    number keep their surface form. Whitespace in the output is collapsed.
    """
    return " ".join(n if _is_number(n) else s for n, s in _numbers_pass(_tokens(text)))


def _is_number(tok: str) -> bool:
    return tok.isascii() and tok.isdigit()


def normalize_time(text: str) -> str:
    """Rewrite clock times (``7 PM``, ``7:00 p.m.``, ``seven thirty pm``,
    ``nine o'clock``) as 24-hour ``HH:MM``; everything else is left alone.

    Bare numbers are never promoted to times: a meridiem, a colon or an
    o'clock word is required.
    """
    toks = _times_pass(_numbers_pass(_tokens(_GLUED_MERIDIEM_RE.sub(r"\1 \2", text))))
    return " ".join(s for _, s in toks)


def _is_iso_date(tok: str) -> bool:
    m = _ISO_DATE_RE.fullmatch(tok)
    return bool(m) and len(tok) == 10 and _render_date(*(int(g) for g in m.groups())) == tok


def _is_month_day(tok: str) -> bool:
    m = _MONTH_DAY_RE.fullmatch(tok)
    return bool(m) and _render_date(None, int(m.group(1)), int(m.group(2))) == tok


def _detect_kinds(words: list[str]) -> frozenset[str]:
    kinds: set[str] = set()
    consumed: set[int] = set()
    for i, w in enumerate(words):
        if EMAIL_RE.fullmatch(w):
            kinds.add("email")
        elif _CANON_TIME_RE.fullmatch(w):
            kinds.add("time")
        elif _MONEY_RE.fullmatch(w):
            kinds.add("money")
        elif _is_iso_date(w) or _is_month_day(w):
            kinds.add("date")
        elif _NUMBER_TOKEN_RE.fullmatch(w) and i + 1 < len(words) and words[i + 1] in _DURATION_UNITS:
            kinds.add("duration")
            consumed.add(i)
    for i, w in enumerate(words):
        if i not in consumed and _NUMBER_TOKEN_RE.fullmatch(w):
            kinds.add("number")
            break
    return frozenset(kinds) or frozenset({"plain"})


@lru_cache(maxsize=65536)
def apply_itn(text: str) -> NormalizedValue:
    """Case-fold, strip punctuation, collapse whitespace, then rewrite numbers,
    times, dates and money into canonical written form.

    >>> apply_itn("Joe's Pizza & Italian Restaurant").canonical
    'joes pizza and italian restaurant'
    >>> apply_itn("7 PM").canonical
    '19:00'
    """
    canonical = _canonicalize(_fold(text))
    # Overlapping date/time patterns can regroup on a second pass; iterate to a fixed point.
    for _ in range(_MAX_PASSES):
        again = _canonicalize(canonical)
        if again == canonical:
            break
        canonical = again
    return NormalizedValue(text, canonical, _detect_kinds(canonical.split()))


def _canonicalize(folded: str) -> str:
    pieces: list[str] = []
    last = 0
    for m in EMAIL_RE.finditer(folded):
        pieces.append(_normalize_plain(folded[last : m.start()]))
        pieces.append(m.group(0))
        last = m.end()
    pieces.append(_normalize_plain(folded[last:]))
    return " ".join(p for p in pieces if p)


def _normalize_plain(text: str) -> str:
    toks = _tokens(" ".join(_strip_punctuation(text).split()))
    for stage in (_numbers_pass, _times_pass, _dates_pass, _money_pass):
        toks = stage(toks)
    return " ".join(n for n, _ in toks)
