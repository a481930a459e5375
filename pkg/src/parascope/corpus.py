"""Corpus domain model: libraries, papers, sections, paragraphs.

Papers are content-addressed: the paper id is derived from the source
bytes, and each paragraph id from (paper id, position, normalized text).
Re-ingesting the same document therefore reproduces identical ids, and
editing a paragraph's text issues a new id.
"""

from __future__ import annotations

import hashlib
import re
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import InvalidInputError, NotFoundError
from .text import find_occurrences, normalize_whitespace

SOURCE_TEI = "tei"
SOURCE_PLAINTEXT = "plaintext"


@dataclass
class PaperMetadata:
    title: str = ""
    abstract: str = ""
    authors: list[str] = field(default_factory=list)
    date: str | None = None
    doi: str | None = None


@dataclass
class Paragraph:
    id: str
    paper_id: str
    section_index: int
    para_index: int
    text: str
    edited: bool = False
    duplicate: bool = False  # exact normalized-text duplicate within the paper


@dataclass
class Section:
    heading: str
    paragraphs: list[Paragraph] = field(default_factory=list)


@dataclass
class SideRecord:
    """Opaque non-paragraph parse output (figure, table, reference).

    Kept for user inspection but excluded from the retrieval pool.
    """

    kind: str
    text: str


@dataclass
class Paper:
    id: str
    metadata: PaperMetadata
    sections: list[Section]
    source_format: str
    needs_review: bool = False
    original_uri: str | None = None
    side_records: list[SideRecord] = field(default_factory=list)

    def paragraphs(self) -> list[Paragraph]:
        """All paragraphs in paper order."""
        return [p for sec in self.sections for p in sec.paragraphs]

    def find_paragraph(self, paragraph_id: str) -> Paragraph:
        for p in self.paragraphs():
            if p.id == paragraph_id:
                return p
        raise NotFoundError(f"unknown paragraph id: {paragraph_id}")


@dataclass
class Library:
    id: str
    name: str
    created_at: str
    paper_ids: list[str] = field(default_factory=list)


def new_library(name: str) -> Library:
    name = normalize_whitespace(name)
    if not name:
        raise InvalidInputError("library name must be non-empty")
    return Library(
        id=uuid.uuid4().hex,
        name=name,
        created_at=datetime.now(timezone.utc).isoformat(),
    )


def paragraph_id(paper_id: str, section_index: int, para_index: int, text: str) -> str:
    """Content hash of the normalized text, salted with the paragraph's position."""
    payload = f"{paper_id}\x1f{section_index}\x1f{para_index}\x1f{text}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def build_paper(
    paper_id_: str,
    metadata: PaperMetadata,
    section_texts: list[tuple[str, list[str]]],
    source_format: str,
    original_uri: str | None = None,
    side_records: list[SideRecord] | None = None,
    needs_review: bool = False,
) -> Paper:
    """Assemble a Paper from (heading, paragraph texts) pairs.

    Normalizes whitespace, drops empty paragraphs, assigns positional
    indices and content-addressed ids, and flags exact duplicates (a known
    upstream parser failure mode; duplicates are kept, never auto-deleted).
    """
    sections: list[Section] = []
    seen_texts: set[str] = set()
    for heading, texts in section_texts:
        sec_index = len(sections)
        paras: list[Paragraph] = []
        for text in texts:
            text = normalize_whitespace(text)
            if not text:
                continue
            para = Paragraph(
                id=paragraph_id(paper_id_, sec_index, len(paras), text),
                paper_id=paper_id_,
                section_index=sec_index,
                para_index=len(paras),
                text=text,
                duplicate=text in seen_texts,
            )
            seen_texts.add(text)
            paras.append(para)
        sections.append(Section(heading=normalize_whitespace(heading), paragraphs=paras))
    return Paper(
        id=paper_id_,
        metadata=metadata,
        sections=sections,
        source_format=source_format,
        needs_review=needs_review,
        original_uri=original_uri,
        side_records=side_records or [],
    )


def plaintext_paper_id(title: str, text: str) -> str:
    payload = b"plaintext\x00" + title.encode("utf-8") + b"\x00" + text.encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:32]


def parse_plaintext(
    title: str,
    text: str,
    delimiter: str | None = None,
    original_uri: str | None = None,
) -> Paper:
    """Build a single-section Paper from plain text.

    Paragraphs split on blank lines by default (CRLF input handled), or on
    a literal `delimiter` when given. Rejects all-whitespace input.
    """
    if not text or not text.strip():
        raise InvalidInputError("plaintext ingestion requires non-empty text")
    normalized = text.replace("\r\n", "\n").replace("\r", "\n")
    if delimiter is None:
        chunks = re.split(r"\n\s*\n", normalized)
    else:
        chunks = normalized.split(delimiter)
    title = normalize_whitespace(title)
    pid = plaintext_paper_id(title, text)
    return build_paper(
        pid,
        PaperMetadata(title=title),
        [("", chunks)],
        SOURCE_PLAINTEXT,
        original_uri=original_uri,
        needs_review=not title,
    )


def apply_correction(paper: Paper, paragraph_id_: str, new_text: str) -> tuple[Paragraph, Paragraph]:
    """Replace a paragraph's text in place; returns (old copy, updated).

    Identical replacement text is a no-op (same id, edited flag untouched).
    Otherwise the paragraph keeps its position but gets a fresh
    content-addressed id and edited=True. Total count and order preserved.
    """
    new_text = normalize_whitespace(new_text)
    if not new_text:
        raise InvalidInputError("replacement text must be non-empty")
    para = paper.find_paragraph(paragraph_id_)
    old = Paragraph(**vars(para))
    if new_text == para.text:
        return old, para
    para.text = new_text
    para.edited = True
    para.id = paragraph_id(paper.id, para.section_index, para.para_index, new_text)
    return old, para


def search_paragraphs(
    paragraphs: list[Paragraph], needle: str, case_sensitive: bool = False
) -> list[tuple[Paragraph, list[tuple[int, int]]]]:
    """Exact substring search; returns matching paragraphs with their spans.

    Input order (paper order) is preserved; paragraphs without a match are
    omitted. No match at all yields an empty list, never an error.
    """
    if not needle:
        raise InvalidInputError("search needle must be non-empty")
    results = []
    for para in paragraphs:
        spans = find_occurrences(para.text, needle, case_sensitive)
        if spans:
            results.append((para, spans))
    return results
