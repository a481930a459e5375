"""Text helpers shared by the corpus and embedding layers."""

from __future__ import annotations

import hashlib
import re

_WS_RUN = re.compile(r"\s+")


def normalize_whitespace(text: str) -> str:
    """Collapse internal whitespace runs to single spaces and trim the ends.

    Content-addressed ids and cache keys must not depend on incidental
    whitespace, so every stored paragraph goes through this first.
    """
    return _WS_RUN.sub(" ", text).strip()


def content_hash(text: str) -> str:
    """Hex SHA-256 of the UTF-8 bytes of `text`."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def content_hash_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def find_occurrences(
    text: str, needle: str, case_sensitive: bool = False
) -> list[tuple[int, int]]:
    """Left-to-right, non-overlapping occurrences of `needle` in `text`.

    Spans are byte offsets into the UTF-8 encoding of `text`, so callers
    slicing raw bytes (or any UTF-8 aware client) can use them directly.
    """
    if not needle:
        raise ValueError("needle must be non-empty")
    flags = 0 if case_sensitive else re.IGNORECASE
    char_spans = [m.span() for m in re.finditer(re.escape(needle), text, flags)]
    if not char_spans:
        return []
    if text.isascii():
        return char_spans
    # Map character offsets to byte offsets via cumulative UTF-8 lengths.
    offsets = [0]
    for ch in text:
        offsets.append(offsets[-1] + len(ch.encode("utf-8")))
    return [(offsets[s], offsets[e]) for s, e in char_spans]
