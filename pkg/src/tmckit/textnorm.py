"""Text normalization helpers shared by ingest, extraction and tokenization.

Everything here is pure and locale-independent: lowercasing via str.lower,
word characters defined as unicode alphanumerics, no stemming.
"""

from __future__ import annotations

import re

_WS_RE = re.compile(r"\s+")
# unicode letters and digits, underscore excluded
_TOKEN_RE = re.compile(r"[^\W_]+")


def collapse_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return _WS_RE.sub(" ", text).strip()


def norm_phrase(text: str) -> str:
    """Lowercase and collapse internal whitespace (lexicon/candidate normal form)."""
    return collapse_ws(text.lower())


def title_match_key(title: str) -> str:
    """Canonical title key for duplicate detection.

    Lowercases, maps every non-alphanumeric character to a space, then
    collapses whitespace, so punctuation and spacing variants compare equal.
    """
    lowered = title.lower()
    cleaned = "".join(ch if ch.isalnum() else " " for ch in lowered)
    return collapse_ws(cleaned)


def word_tokens(text: str) -> list[tuple[str, int, int]]:
    """Alphanumeric tokens of ``text`` with character offsets.

    Returns (lowercased_token, start, end) triples; a token is a maximal run
    of alphanumeric characters, so hyphens, punctuation and whitespace all
    act as word boundaries.
    """
    return [
        (m.group(0).lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)
    ]


def levenshtein(a: str, b: str) -> int:
    """Plain edit distance (insert/delete/substitute, all cost 1)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def levenshtein_similarity(a: str, b: str) -> float:
    """Normalized similarity 1 - dist/max(len); 1.0 when both are empty."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest
