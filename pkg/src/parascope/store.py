"""Durable workspace persistence.

Plain-directory JSON so users can inspect the raw data, plus a binary
embedding cache. Layout under the workspace root:

    workspace.json                    schema version, current model id
    libraries/<id>/library.json       library record
    libraries/<id>/paper-<id>.json    one document per paper
    retrievals/<id>.json              retrieval specs
    labels.jsonl                      explicit label records, one per line
    cache/embeddings.bin              embedding cache
    models/<id>.json                  trained classifier heads + report

Every write is temp-file-then-rename, so any single file is always either
the old or the new state. A lock file enforces a single writer per
workspace; readers work from immutable snapshots.
"""

from __future__ import annotations

import copy
import json
import logging
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from .classifier import (
    Category,
    ClassificationReport,
    LabelRecord,
    LinearLabelModel,
    MetricRow,
    TrainConfig,
)
from .corpus import (
    Library,
    Paper,
    PaperMetadata,
    Paragraph,
    Section,
    SideRecord,
    apply_correction,
    new_library,
)
from .errors import (
    CorruptStoreError,
    InvalidInputError,
    NotFoundError,
    UnsupportedVersionError,
    WorkspaceLockedError,
)
from .retrieval import RetrievalSpec, Weights, with_updated_paragraph_id

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

CACHE_FILE = "cache/embeddings.bin"


@dataclass(frozen=True)
class Scope:
    kind: str  # "library" | "paper"
    id: str

    def __str__(self) -> str:
        return f"{self.kind}:{self.id}"


def parse_scope(value: str) -> Scope:
    kind, _, ident = value.partition(":")
    if kind not in ("library", "paper") or not ident:
        raise InvalidInputError(
            f"scope must look like 'library:<id>' or 'paper:<id>', got {value!r}"
        )
    return Scope(kind, ident)


def write_json_atomic(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _read_json(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptStoreError(f"corrupt store file {path}: {exc}") from exc


def _check_version(payload: dict, path: Path) -> None:
    version = payload.get("schema_version", 1)
    if version > SCHEMA_VERSION:
        raise UnsupportedVersionError(
            f"{path} written by schema {version}; this build supports <= {SCHEMA_VERSION}"
        )


# ---------------------------------------------------------------- serializers

def paper_to_dict(paper: Paper) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": paper.id,
        "metadata": {
            "title": paper.metadata.title,
            "abstract": paper.metadata.abstract,
            "authors": list(paper.metadata.authors),
            "date": paper.metadata.date,
            "doi": paper.metadata.doi,
        },
        "source_format": paper.source_format,
        "needs_review": paper.needs_review,
        "original_uri": paper.original_uri,
        "sections": [
            {
                "heading": sec.heading,
                "paragraphs": [
                    {
                        "id": p.id,
                        "paper_id": p.paper_id,
                        "section_index": p.section_index,
                        "para_index": p.para_index,
                        "text": p.text,
                        "edited": p.edited,
                        "duplicate": p.duplicate,
                    }
                    for p in sec.paragraphs
                ],
            }
            for sec in paper.sections
        ],
        "side_records": [{"kind": r.kind, "text": r.text} for r in paper.side_records],
    }


def paper_from_dict(payload: dict) -> Paper:
    meta = payload["metadata"]
    return Paper(
        id=payload["id"],
        metadata=PaperMetadata(
            title=meta["title"],
            abstract=meta["abstract"],
            authors=list(meta["authors"]),
            date=meta.get("date"),
            doi=meta.get("doi"),
        ),
        sections=[
            Section(
                heading=sec["heading"],
                paragraphs=[Paragraph(**p) for p in sec["paragraphs"]],
            )
            for sec in payload["sections"]
        ],
        source_format=payload["source_format"],
        needs_review=payload["needs_review"],
        original_uri=payload.get("original_uri"),
        side_records=[SideRecord(**r) for r in payload.get("side_records", [])],
    )


def spec_to_dict(spec: RetrievalSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": spec.id,
        "name": spec.name,
        "description": spec.description,
        "category": spec.category,
        "positive_queries": list(spec.positive_queries),
        "negative_queries": list(spec.negative_queries),
        "positive_paragraph_ids": list(spec.positive_paragraph_ids),
        "negative_paragraph_ids": list(spec.negative_paragraph_ids),
        "weights": {
            "a": spec.weights.a,
            "b": spec.weights.b,
            "c": spec.weights.c,
            "d": spec.weights.d,
        },
        "min_score": spec.min_score,
    }


def spec_from_dict(payload: dict) -> RetrievalSpec:
    weights = payload.get("weights", {})
    return RetrievalSpec(
        id=payload["id"],
        name=payload["name"],
        description=payload.get("description"),
        category=payload.get("category"),
        positive_queries=list(payload.get("positive_queries", [])),
        negative_queries=list(payload.get("negative_queries", [])),
        positive_paragraph_ids=list(payload.get("positive_paragraph_ids", [])),
        negative_paragraph_ids=list(payload.get("negative_paragraph_ids", [])),
        weights=Weights(**weights) if weights else Weights(),
        min_score=payload.get("min_score"),
    )


def _report_to_dict(report: ClassificationReport | None) -> dict | None:
    return report.to_dict() if report else None


def _report_from_dict(payload: dict | None) -> ClassificationReport | None:
    if payload is None:
        return None

    def row(d: dict) -> MetricRow:
        return MetricRow(
            precision=d["precision"],
            recall=d["recall"],
            f1=d["f1"],
            support=d["support"],
            zero_division=d.get("zero_division", False),
        )

    return ClassificationReport(
        classes={name: row(r) for name, r in payload["classes"].items()},
        averages={name: row(r) for name, r in payload["averages"].items()},
        total_support=payload["total_support"],
    )


@dataclass
class TrainedModelRecord:
    model: LinearLabelModel
    library_id: str
    created_at: str
    n_train: int
    n_test: int
    test_fraction: float
    report: ClassificationReport | None = None


def model_record_to_dict(record: TrainedModelRecord) -> dict:
    model = record.model
    return {
        "schema_version": SCHEMA_VERSION,
        "id": model.id,
        "library_id": record.library_id,
        "created_at": record.created_at,
        "provider_id": model.provider_id,
        "model_id": model.model_id,
        "weights": model.weights.tolist(),
        "biases": model.biases.tolist(),
        "config": {
            "learning_rate": model.config.learning_rate,
            "epochs": model.config.epochs,
            "l2": model.config.l2,
            "seed": model.config.seed,
        },
        "degenerate_heads": list(model.degenerate_heads),
        "n_train": record.n_train,
        "n_test": record.n_test,
        "test_fraction": record.test_fraction,
        "report": _report_to_dict(record.report),
    }


def model_record_from_dict(payload: dict) -> TrainedModelRecord:
    model = LinearLabelModel(
        weights=np.asarray(payload["weights"], dtype=np.float64),
        biases=np.asarray(payload["biases"], dtype=np.float64),
        provider_id=payload["provider_id"],
        model_id=payload["model_id"],
        config=TrainConfig(**payload["config"]),
        degenerate_heads=list(payload.get("degenerate_heads", [])),
        id=payload["id"],
    )
    return TrainedModelRecord(
        model=model,
        library_id=payload["library_id"],
        created_at=payload["created_at"],
        n_train=payload["n_train"],
        n_test=payload["n_test"],
        test_fraction=payload["test_fraction"],
        report=_report_from_dict(payload.get("report")),
    )


def label_to_dict(record: LabelRecord) -> dict:
    return {
        "paragraph_id": record.paragraph_id,
        "labels": sorted(c.name.lower() for c in record.labels),
        "irrelevant": record.irrelevant,
    }


def label_from_dict(payload: dict) -> LabelRecord:
    return LabelRecord(
        paragraph_id=payload["paragraph_id"],
        labels={Category[name.upper()] for name in payload.get("labels", [])},
        irrelevant=payload.get("irrelevant", False),
    )


# ------------------------------------------------------------------- snapshot

@dataclass
class Snapshot:
    """Immutable point-in-time view used by ranking, training, and queries."""

    libraries: dict[str, Library]
    papers: dict[str, Paper]
    specs: dict[str, RetrievalSpec]
    labels: dict[str, LabelRecord]

    def __post_init__(self):
        self._paragraphs: dict[str, Paragraph] = {}
        self._paper_of: dict[str, str] = {}
        for paper in self.papers.values():
            for para in paper.paragraphs():
                self._paragraphs[para.id] = para
                self._paper_of[para.id] = paper.id

    def __eq__(self, other):
        if not isinstance(other, Snapshot):
            return NotImplemented
        return (
            self.libraries == other.libraries
            and self.papers == other.papers
            and self.specs == other.specs
            and self.labels == other.labels
        )

    def library(self, library_id: str) -> Library:
        if library_id not in self.libraries:
            raise NotFoundError(f"unknown library id: {library_id}")
        return self.libraries[library_id]

    def paper(self, paper_id: str) -> Paper:
        if paper_id not in self.papers:
            raise NotFoundError(f"unknown paper id: {paper_id}")
        return self.papers[paper_id]

    def spec(self, spec_id: str) -> RetrievalSpec:
        if spec_id not in self.specs:
            raise NotFoundError(f"unknown retrieval id: {spec_id}")
        return self.specs[spec_id]

    def paragraph(self, paragraph_id: str) -> Paragraph:
        if paragraph_id not in self._paragraphs:
            raise NotFoundError(f"unknown paragraph id: {paragraph_id}")
        return self._paragraphs[paragraph_id]

    def paper_of_paragraph(self, paragraph_id: str) -> Paper:
        self.paragraph(paragraph_id)
        return self.papers[self._paper_of[paragraph_id]]

    def has_paragraph(self, paragraph_id: str) -> bool:
        return paragraph_id in self._paragraphs

    def paragraphs_in_scope(self, scope: Scope) -> list[Paragraph]:
        """Paragraphs in deterministic paper order for the given scope."""
        if scope.kind == "paper":
            return self.paper(scope.id).paragraphs()
        library = self.library(scope.id)
        out: list[Paragraph] = []
        for paper_id in library.paper_ids:
            out.extend(self.papers[paper_id].paragraphs())
        return out

    def resolve_library(self, name_or_id: str) -> Library:
        if name_or_id in self.libraries:
            return self.libraries[name_or_id]
        matches = [l for l in self.libraries.values() if l.name == name_or_id]
        if len(matches) == 1:
            return matches[0]
        raise NotFoundError(f"unknown library: {name_or_id}")


# ------------------------------------------------------------------ workspace

class Workspace:
    """Single-writer store; all mutations persist before returning.

    Mutations are serialized by an in-process lock, and a lock file keeps
    other processes out. Reads should go through `snapshot()`, which is
    unaffected by later mutations.
    """

    def __init__(self, root: str | Path, lock_timeout: float = 0.5):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._mutex = threading.RLock()
        self._file_lock = FileLock(str(self.root / ".lock"))
        try:
            self._file_lock.acquire(timeout=lock_timeout)
        except Timeout:
            raise WorkspaceLockedError(
                f"workspace {self.root} is locked by another writer"
            ) from None
        try:
            self._load()
        except Exception:
            self._file_lock.release()
            raise

    # -- lifecycle

    def close(self) -> None:
        if self._file_lock.is_locked:
            self._file_lock.release()

    def __enter__(self) -> "Workspace":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- loading

    def _load(self) -> None:
        self.libraries: dict[str, Library] = {}
        self.papers: dict[str, Paper] = {}
        self.paper_home: dict[str, str] = {}
        self.specs: dict[str, RetrievalSpec] = {}
        self.labels: dict[str, LabelRecord] = {}
        self.models: dict[str, TrainedModelRecord] = {}
        self.current_model_id: str | None = None

        for stray in self.root.rglob("*.tmp*"):
            stray.unlink(missing_ok=True)

        ws_file = self.root / "workspace.json"
        if ws_file.exists():
            payload = _read_json(ws_file)
            _check_version(payload, ws_file)
            self.current_model_id = payload.get("current_model_id")
        else:
            self._save_workspace_file()

        lib_root = self.root / "libraries"
        if lib_root.exists():
            for lib_dir in sorted(lib_root.iterdir()):
                lib_file = lib_dir / "library.json"
                if not lib_file.exists():
                    continue
                payload = _read_json(lib_file)
                _check_version(payload, lib_file)
                library = Library(
                    id=payload["id"],
                    name=payload["name"],
                    created_at=payload["created_at"],
                    paper_ids=list(payload["paper_ids"]),
                )
                self.libraries[library.id] = library
                for paper_file in sorted(lib_dir.glob("paper-*.json")):
                    payload = _read_json(paper_file)
                    _check_version(payload, paper_file)
                    paper = paper_from_dict(payload)
                    self.papers[paper.id] = paper
                    self.paper_home[paper.id] = library.id

        for library in self.libraries.values():
            known = [pid for pid in library.paper_ids if pid in self.papers]
            if len(known) != len(library.paper_ids):
                logger.warning(
                    "library %s references missing papers; pruned", library.id
                )
                library.paper_ids = known
                self._save_library(library)

        spec_root = self.root / "retrievals"
        if spec_root.exists():
            for spec_file in sorted(spec_root.glob("*.json")):
                payload = _read_json(spec_file)
                _check_version(payload, spec_file)
                spec = spec_from_dict(payload)
                self.specs[spec.id] = spec

        labels_file = self.root / "labels.jsonl"
        if labels_file.exists():
            with open(labels_file, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, 1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        payload = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise CorruptStoreError(
                            f"corrupt store file {labels_file} (line {line_no}): {exc}"
                        ) from exc
                    record = label_from_dict(payload)
                    self.labels[record.paragraph_id] = record

        model_root = self.root / "models"
        if model_root.exists():
            for model_file in sorted(model_root.glob("*.json")):
                payload = _read_json(model_file)
                _check_version(payload, model_file)
                record = model_record_from_dict(payload)
                self.models[record.model.id] = record
        if self.current_model_id and self.current_model_id not in self.models:
            logger.warning("current model %s missing; cleared", self.current_model_id)
            self.current_model_id = None
            self._save_workspace_file()

        self._prune_dangling_paragraph_refs()

    def _prune_dangling_paragraph_refs(self) -> None:
        """Drop references to paragraphs that no longer exist (a crash
        between a paper write and its reference migration can leave them)."""
        known = {p.id for paper in self.papers.values() for p in paper.paragraphs()}
        for spec in self.specs.values():
            pos = [pid for pid in spec.positive_paragraph_ids if pid in known]
            neg = [pid for pid in spec.negative_paragraph_ids if pid in known]
            if len(pos) != len(spec.positive_paragraph_ids) or len(neg) != len(
                spec.negative_paragraph_ids
            ):
                logger.warning("retrieval %s had dangling paragraph refs; pruned", spec.id)
                spec.positive_paragraph_ids = pos
                spec.negative_paragraph_ids = neg
                self._save_spec_file(spec)
        dangling = [pid for pid in self.labels if pid not in known]
        if dangling:
            logger.warning("%d label records had dangling paragraph refs; pruned", len(dangling))
            for pid in dangling:
                del self.labels[pid]
            self._save_labels_file()

    # -- file writers

    def _save_workspace_file(self) -> None:
        write_json_atomic(
            self.root / "workspace.json",
            {"schema_version": SCHEMA_VERSION, "current_model_id": self.current_model_id},
        )

    def _save_library(self, library: Library) -> None:
        write_json_atomic(
            self.root / "libraries" / library.id / "library.json",
            {
                "schema_version": SCHEMA_VERSION,
                "id": library.id,
                "name": library.name,
                "created_at": library.created_at,
                "paper_ids": list(library.paper_ids),
            },
        )

    def _save_paper(self, paper: Paper) -> None:
        home = self.paper_home[paper.id]
        write_json_atomic(
            self.root / "libraries" / home / f"paper-{paper.id}.json",
            paper_to_dict(paper),
        )

    def _save_spec_file(self, spec: RetrievalSpec) -> None:
        write_json_atomic(self.root / "retrievals" / f"{spec.id}.json", spec_to_dict(spec))

    def _save_labels_file(self) -> None:
        path = self.root / "labels.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        with open(tmp, "w", encoding="utf-8") as fh:
            for record in self.labels.values():
                fh.write(json.dumps(label_to_dict(record), ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def _save_model(self, record: TrainedModelRecord) -> None:
        write_json_atomic(
            self.root / "models" / f"{record.model.id}.json", model_record_to_dict(record)
        )

    # -- reads

    def snapshot(self) -> Snapshot:
        with self._mutex:
            return Snapshot(
                libraries=copy.deepcopy(self.libraries),
                papers=copy.deepcopy(self.papers),
                specs=copy.deepcopy(self.specs),
                labels=copy.deepcopy(self.labels),
            )

    @property
    def cache_path(self) -> str:
        return str(self.root / CACHE_FILE)

    # -- mutations

    def create_library(self, name: str) -> Library:
        with self._mutex:
            library = new_library(name)
            self.libraries[library.id] = library
            self._save_library(library)
            return copy.deepcopy(library)

    def add_paper(self, library_id: str, paper: Paper) -> tuple[Paper, bool]:
        """Insert a paper, deduplicated by its content-derived id.

        Returns (paper, created). Re-adding known content only ensures
        library membership.
        """
        with self._mutex:
            if library_id not in self.libraries:
                raise NotFoundError(f"unknown library id: {library_id}")
            library = self.libraries[library_id]
            created = paper.id not in self.papers
            if created:
                self.papers[paper.id] = paper
                self.paper_home[paper.id] = library_id
                self._save_paper(paper)
            if paper.id not in library.paper_ids:
                library.paper_ids.append(paper.id)
                self._save_library(library)
            return copy.deepcopy(self.papers[paper.id]), created

    def correct_paragraph(self, paragraph_id: str, new_text: str) -> Paragraph:
        """Apply a user correction and migrate every reference to the new id."""
        with self._mutex:
            paper = None
            for candidate in self.papers.values():
                if any(p.id == paragraph_id for p in candidate.paragraphs()):
                    paper = candidate
                    break
            if paper is None:
                raise NotFoundError(f"unknown paragraph id: {paragraph_id}")
            old, updated = apply_correction(paper, paragraph_id, new_text)
            if old.id == updated.id:
                return copy.deepcopy(updated)
            self._save_paper(paper)
            for spec_id, spec in list(self.specs.items()):
                migrated = with_updated_paragraph_id(spec, old.id, updated.id)
                if migrated != spec:
                    self.specs[spec_id] = migrated
                    self._save_spec_file(migrated)
            if old.id in self.labels:
                record = self.labels.pop(old.id)
                record.paragraph_id = updated.id
                self.labels[updated.id] = record
                self._save_labels_file()
            return copy.deepcopy(updated)

    def save_spec(self, spec: RetrievalSpec) -> RetrievalSpec:
        with self._mutex:
            spec.validate()
            self.specs[spec.id] = copy.deepcopy(spec)
            self._save_spec_file(spec)
            return copy.deepcopy(spec)

    def set_label_record(self, record: LabelRecord) -> LabelRecord:
        with self._mutex:
            record.validate()
            if not record.labels and not record.irrelevant:
                self.labels.pop(record.paragraph_id, None)
            else:
                self.labels[record.paragraph_id] = copy.deepcopy(record)
            self._save_labels_file()
            return copy.deepcopy(record)

    def save_model(self, record: TrainedModelRecord, make_current: bool = True) -> None:
        with self._mutex:
            self.models[record.model.id] = record
            self._save_model(record)
            if make_current:
                self.current_model_id = record.model.id
                self._save_workspace_file()

    def current_model(self) -> TrainedModelRecord:
        with self._mutex:
            if not self.current_model_id or self.current_model_id not in self.models:
                raise NotFoundError("no trained classifier available")
            return self.models[self.current_model_id]


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()
