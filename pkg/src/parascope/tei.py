"""GROBID TEI-XML ingestion.

Consumes the TEI output of an upstream PDF parser (namespace
http://www.tei-c.org/ns/1.0). Header metadata, body sections and
paragraphs are extracted; figures, tables and bibliography entries are
kept as opaque side records. Inline markup (refs, formulas) is flattened
to plain text since the retrieval and classification layers operate on
plain paragraphs.
"""

from __future__ import annotations

import hashlib
import xml.etree.ElementTree as ET

from .corpus import (
    SOURCE_TEI,
    Paper,
    PaperMetadata,
    SideRecord,
    build_paper,
)
from .errors import EmptyDocumentError, MalformedXmlError
from .text import normalize_whitespace


def _local(tag: str) -> str:
    """Tag name without namespace; matching is namespace-lenient."""
    return tag.rsplit("}", 1)[-1]


def _flat_text(el: ET.Element | None) -> str:
    if el is None:
        return ""
    return normalize_whitespace("".join(el.itertext()))


def _find(el: ET.Element, *path: str) -> ET.Element | None:
    """Descend by local tag names, first match at each step."""
    node: ET.Element | None = el
    for name in path:
        if node is None:
            return None
        node = next((c for c in node if _local(c.tag) == name), None)
    return node


def _find_all(el: ET.Element, name: str) -> list[ET.Element]:
    return [c for c in el.iter() if _local(c.tag) == name]


def _extract_authors(bibl: ET.Element | None) -> list[str]:
    authors = []
    if bibl is None:
        return authors
    for author in _find_all(bibl, "author"):
        pers = next((c for c in author if _local(c.tag) == "persName"), None)
        if pers is None:
            continue
        forenames = [_flat_text(c) for c in pers if _local(c.tag) == "forename"]
        surnames = [_flat_text(c) for c in pers if _local(c.tag) == "surname"]
        name = normalize_whitespace(" ".join(forenames + surnames))
        if name and name not in authors:
            authors.append(name)
    return authors


def _extract_date(header: ET.Element) -> str | None:
    for date in _find_all(header, "date"):
        when = date.get("when")
        if when:
            return when
        text = _flat_text(date)
        if text:
            return text
    return None


def _extract_doi(header: ET.Element) -> str | None:
    for idno in _find_all(header, "idno"):
        if (idno.get("type") or "").upper() == "DOI":
            text = _flat_text(idno)
            if text:
                return text
    return None


def parse_metadata(root: ET.Element) -> tuple[PaperMetadata, list[str]]:
    """Header metadata plus the abstract's individual paragraph texts."""
    header = _find(root, "teiHeader")
    meta = PaperMetadata()
    abstract_paras: list[str] = []
    if header is None:
        return meta, abstract_paras

    file_desc = _find(header, "fileDesc")
    if file_desc is not None:
        meta.title = _flat_text(_find(file_desc, "titleStmt", "title"))
        source = _find(file_desc, "sourceDesc")
        bibl = _find(source, "biblStruct") if source is not None else None
        analytic = _find(bibl, "analytic") if bibl is not None else None
        meta.authors = _extract_authors(analytic if analytic is not None else bibl)

    abstract = _find(header, "profileDesc", "abstract")
    if abstract is not None:
        abstract_paras = [
            _flat_text(p) for p in _find_all(abstract, "p") if _flat_text(p)
        ]
        if not abstract_paras:
            whole = _flat_text(abstract)
            abstract_paras = [whole] if whole else []
        meta.abstract = " ".join(abstract_paras)

    meta.date = _extract_date(header)
    meta.doi = _extract_doi(header)
    return meta, abstract_paras


def _walk_divs(parent: ET.Element, out: list[tuple[str, list[str]]]) -> None:
    for child in parent:
        if _local(child.tag) != "div":
            continue
        heading = ""
        texts: list[str] = []
        for node in child:
            tag = _local(node.tag)
            if tag == "head" and not heading:
                heading = _flat_text(node)
            elif tag == "p":
                texts.append(_flat_text(node))
        out.append((heading, texts))
        _walk_divs(child, out)  # nested divs become their own sections


def parse_body_sections(root: ET.Element) -> list[tuple[str, list[str]]]:
    body = _find(root, "text", "body")
    sections: list[tuple[str, list[str]]] = []
    if body is not None:
        _walk_divs(body, sections)
    return sections


def parse_side_records(root: ET.Element) -> list[SideRecord]:
    records: list[SideRecord] = []
    body = _find(root, "text", "body")
    if body is not None:
        for fig in _find_all(body, "figure"):
            kind = "table" if (fig.get("type") or "") == "table" else "figure"
            text = _flat_text(fig)
            if text:
                records.append(SideRecord(kind=kind, text=text))
    back = _find(root, "text", "back")
    if back is not None:
        for bibl in _find_all(back, "biblStruct"):
            text = _flat_text(bibl)
            if text:
                records.append(SideRecord(kind="reference", text=text))
    return records


def tei_paper_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:32]


def parse_tei(
    data: bytes,
    original_uri: str | None = None,
    include_abstract: bool = True,
) -> Paper:
    """Parse a TEI document into a Paper.

    The abstract, when present and `include_abstract` is set, becomes a
    leading section headed "Abstract" so it participates in retrieval.
    Missing title or authors flag the paper for review. A document whose
    body contains no non-empty paragraph is rejected outright.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, column = exc.position
        raise MalformedXmlError(
            f"malformed XML at line {line}, column {column}: {exc.msg}"
        ) from exc

    meta, abstract_paras = parse_metadata(root)
    body_sections = parse_body_sections(root)
    if not any(normalize_whitespace(t) for _, texts in body_sections for t in texts):
        raise EmptyDocumentError("empty document: no body paragraphs")

    sections = list(body_sections)
    if include_abstract and abstract_paras:
        sections.insert(0, ("Abstract", abstract_paras))

    return build_paper(
        tei_paper_id(data),
        meta,
        sections,
        SOURCE_TEI,
        original_uri=original_uri,
        side_records=parse_side_records(root),
        needs_review=not meta.title or not meta.authors,
    )
