"""Orchestration facade tying the store, providers, and algorithms together.

The HTTP service and the CLI are both thin clients of this class; neither
adds behavior of its own beyond validation and serialization.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import classifier, corpus, query as query_mod, retrieval, tei
from .classifier import (
    Category,
    ClassificationReport,
    Dataset,
    LabelRecord,
    TrainConfig,
    category_from_name,
)
from .config import Settings, build_embedding_provider, build_llm_provider
from .corpus import Library, Paper, Paragraph
from .embedding import EmbeddingCache, EmbeddingProvider, EmbeddingVector, embed_cached
from .errors import InvalidInputError, NotFoundError, ProviderMismatchError
from .query import Answer, LLMProvider
from .retrieval import Polarity, RankedHit, RetrievalSpec, Weights
from .store import Scope, Snapshot, TrainedModelRecord, Workspace, now_iso

logger = logging.getLogger(__name__)

DEFAULT_RETRIEVALS_PACKAGE = "parascope"
DEFAULT_RETRIEVALS_DIR = "data/default_retrievals"


@dataclass
class QuerySource:
    kind: str  # "semantic" | "retrieval" | "class"
    retrieval_id: str | None = None
    category: str | None = None


def parse_query_source(value: str) -> QuerySource:
    if value == "semantic":
        return QuerySource(kind="semantic")
    kind, _, arg = value.partition(":")
    if kind == "retrieval" and arg:
        return QuerySource(kind="retrieval", retrieval_id=arg)
    if kind == "class" and arg:
        category_from_name(arg)  # validate early
        return QuerySource(kind="class", category=arg)
    raise InvalidInputError(
        f"source must be 'semantic', 'retrieval:<id>' or 'class:<category>', got {value!r}"
    )


class Workbench:
    def __init__(
        self,
        workspace: Workspace,
        embedding_provider: EmbeddingProvider,
        llm_provider: LLMProvider,
        settings: Settings | None = None,
    ):
        self.workspace = workspace
        self.provider = embedding_provider
        self.llm = llm_provider
        self.settings = settings or Settings()
        dim = self.provider.dim or 0
        self.cache = EmbeddingCache.load(
            workspace.cache_path, self.provider.provider_id, self.provider.model_id, dim
        )

    @classmethod
    def from_settings(cls, settings: Settings) -> "Workbench":
        workspace = Workspace(settings.workspace)
        return cls(
            workspace,
            build_embedding_provider(settings),
            build_llm_provider(settings),
            settings,
        )

    def close(self) -> None:
        if self.cache.dirty:
            self.cache.save(self.workspace.cache_path)
        self.workspace.close()

    def __enter__(self) -> "Workbench":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # ------------------------------------------------------------- embeddings

    def _embed(self, texts: list[str]) -> list[EmbeddingVector]:
        vectors = embed_cached(self.provider, texts, self.cache)
        if self.cache.dirty:
            self.cache.save(self.workspace.cache_path)
        return vectors

    # ----------------------------------------------------------------- corpus

    def create_library(self, name: str) -> Library:
        return self.workspace.create_library(name)

    def list_libraries(self) -> list[Library]:
        snap = self.workspace.snapshot()
        return sorted(snap.libraries.values(), key=lambda l: l.created_at)

    def get_library(self, name_or_id: str) -> Library:
        return self.workspace.snapshot().resolve_library(name_or_id)

    def list_papers(self, library_id: str) -> list[Paper]:
        snap = self.workspace.snapshot()
        library = snap.library(library_id)
        return [snap.papers[pid] for pid in library.paper_ids]

    def get_paper(self, paper_id: str) -> Paper:
        return self.workspace.snapshot().paper(paper_id)

    def ingest_tei(
        self, library_id: str, data: bytes, original_uri: str | None = None
    ) -> tuple[Paper, bool]:
        paper = tei.parse_tei(
            data,
            original_uri=original_uri,
            include_abstract=self.settings.include_abstract,
        )
        return self.workspace.add_paper(library_id, paper)

    def ingest_plaintext(
        self,
        library_id: str,
        title: str,
        text: str,
        delimiter: str | None = None,
        original_uri: str | None = None,
    ) -> tuple[Paper, bool]:
        paper = corpus.parse_plaintext(title, text, delimiter, original_uri)
        return self.workspace.add_paper(library_id, paper)

    def correct_paragraph(self, paragraph_id: str, new_text: str) -> Paragraph:
        return self.workspace.correct_paragraph(paragraph_id, new_text)

    def get_paragraphs(self, paper_id: str) -> list[Paragraph]:
        return self.workspace.snapshot().paper(paper_id).paragraphs()

    def text_search(
        self, scope: Scope, needle: str, case_sensitive: bool = False
    ) -> list[tuple[Paragraph, list[tuple[int, int]]]]:
        snap = self.workspace.snapshot()
        return corpus.search_paragraphs(
            snap.paragraphs_in_scope(scope), needle, case_sensitive
        )

    # -------------------------------------------------------------- retrieval

    def create_retrieval(
        self,
        name: str,
        description: str | None = None,
        category: str | None = None,
        positive_queries: list[str] | None = None,
        negative_queries: list[str] | None = None,
        weights: Weights | None = None,
    ) -> RetrievalSpec:
        if category:
            category_from_name(category)
        spec = retrieval.new_retrieval_spec(
            name,
            description=description,
            category=category,
            positive_queries=positive_queries or [],
            negative_queries=negative_queries or [],
            weights=weights,
        )
        return self.workspace.save_spec(spec)

    def list_retrievals(self) -> list[RetrievalSpec]:
        snap = self.workspace.snapshot()
        return sorted(snap.specs.values(), key=lambda s: s.name)

    def get_retrieval(self, name_or_id: str) -> RetrievalSpec:
        snap = self.workspace.snapshot()
        if name_or_id in snap.specs:
            return snap.specs[name_or_id]
        matches = [s for s in snap.specs.values() if s.name == name_or_id]
        if len(matches) == 1:
            return matches[0]
        raise NotFoundError(f"unknown retrieval: {name_or_id}")

    def update_retrieval(self, spec: RetrievalSpec) -> RetrievalSpec:
        self.workspace.snapshot().spec(spec.id)  # must already exist
        return self.workspace.save_spec(spec)

    def import_default_retrievals(self) -> list[RetrievalSpec]:
        """Load the four shipped default retrievals; idempotent by name."""
        existing = {s.name for s in self.list_retrievals()}
        imported = []
        data_dir = resources.files(DEFAULT_RETRIEVALS_PACKAGE) / DEFAULT_RETRIEVALS_DIR
        for entry in sorted(data_dir.iterdir(), key=lambda e: e.name):
            if not entry.name.endswith(".json"):
                continue
            payload = json.loads(entry.read_text(encoding="utf-8"))
            if payload["name"] in existing:
                imported.append(self.get_retrieval(payload["name"]))
                continue
            imported.append(
                self.create_retrieval(
                    name=payload["name"],
                    description=payload.get("description"),
                    category=payload.get("category"),
                    positive_queries=payload.get("positive_queries", []),
                    negative_queries=payload.get("negative_queries", []),
                )
            )
        return imported

    def label_retrieval_paragraph(
        self, spec_id: str, paragraph_id: str, polarity: Polarity | str
    ) -> RetrievalSpec:
        polarity = Polarity(polarity)
        snap = self.workspace.snapshot()
        spec = snap.spec(spec_id)
        snap.paragraph(paragraph_id)  # existence check
        spec.apply_label(paragraph_id, polarity)
        return self.workspace.save_spec(spec)

    def _embed_for_spec(
        self, snap: Snapshot, spec: RetrievalSpec, candidates: list[Paragraph]
    ) -> tuple[list[EmbeddingVector], dict[str, EmbeddingVector], dict[str, EmbeddingVector]]:
        member_ids = list(
            dict.fromkeys(spec.positive_paragraph_ids + spec.negative_paragraph_ids)
        )
        member_texts = [snap.paragraph(pid).text for pid in member_ids]
        queries = list(dict.fromkeys(spec.positive_queries + spec.negative_queries))
        texts = [p.text for p in candidates] + member_texts + queries
        vectors = self._embed(texts)
        n, m = len(candidates), len(member_ids)
        return (
            vectors[:n],
            dict(zip(member_ids, vectors[n : n + m])),
            dict(zip(queries, vectors[n + m :])),
        )

    def retrieval_embedding(self, spec_id: str) -> EmbeddingVector:
        snap = self.workspace.snapshot()
        spec = snap.spec(spec_id)
        _, member_vecs, query_vecs = self._embed_for_spec(snap, spec, [])
        return retrieval.compute_retrieval_embedding(spec, member_vecs, query_vecs)

    def _rank_spec(
        self, snap: Snapshot, spec: RetrievalSpec, scope: Scope, k: int
    ) -> list[RankedHit]:
        candidates = snap.paragraphs_in_scope(scope)
        if not candidates:
            raise InvalidInputError(f"scope {scope} contains no paragraphs")
        cand_vecs, member_vecs, query_vecs = self._embed_for_spec(snap, spec, candidates)
        r = retrieval.compute_retrieval_embedding(spec, member_vecs, query_vecs)
        pairs = [(p.id, v) for p, v in zip(candidates, cand_vecs)]
        return retrieval.rank_candidates(r, pairs, k=k, min_score=spec.min_score)

    def rank(self, spec_id: str, scope: Scope, k: int = 5) -> list[RankedHit]:
        snap = self.workspace.snapshot()
        return self._rank_spec(snap, snap.spec(spec_id), scope, k)

    def semantic_search(self, text: str, scope: Scope, k: int = 5) -> list[RankedHit]:
        snap = self.workspace.snapshot()
        return self._rank_spec(snap, retrieval.semantic_search_spec(text), scope, k)

    # ----------------------------------------------------------------- labels

    def set_paragraph_labels(
        self, paragraph_id: str, categories: list[str], irrelevant: bool = False
    ) -> LabelRecord:
        snap = self.workspace.snapshot()
        snap.paragraph(paragraph_id)
        record = LabelRecord(
            paragraph_id=paragraph_id,
            labels={category_from_name(c) for c in categories},
            irrelevant=irrelevant,
        )
        return self.workspace.set_label_record(record)

    def get_paragraph_labels(self, paragraph_id: str) -> LabelRecord | None:
        snap = self.workspace.snapshot()
        snap.paragraph(paragraph_id)
        return snap.labels.get(paragraph_id)

    # ------------------------------------------------------------- classifier

    def _collect_labeled_rows(
        self,
        snap: Snapshot,
        library: Library,
        include_irrelevant: bool,
        max_irrelevant: int | None = None,
        seed: int = 0,
    ) -> list[tuple[str, str, set[Category]]]:
        by_pid: dict[str, set[Category]] = defaultdict(set)
        for spec in snap.specs.values():
            if not spec.category:
                continue
            cat = category_from_name(spec.category)
            for pid in spec.positive_paragraph_ids:
                by_pid[pid].add(cat)
        for record in snap.labels.values():
            by_pid[record.paragraph_id] |= record.labels
        irrelevant = {
            r.paragraph_id
            for r in snap.labels.values()
            if r.irrelevant and not by_pid.get(r.paragraph_id)
        }
        rows: list[tuple[str, str, set[Category]]] = []
        irrelevant_positions = []
        for paper_id in library.paper_ids:
            for para in snap.papers[paper_id].paragraphs():
                cats = by_pid.get(para.id)
                if cats:
                    rows.append((para.id, para.text, cats))
                elif include_irrelevant and para.id in irrelevant:
                    irrelevant_positions.append(len(rows))
                    rows.append((para.id, para.text, set()))
        if max_irrelevant is not None and len(irrelevant_positions) > max_irrelevant:
            # optional down-sampling: irrelevant rows dominate labeled data
            # quickly, so cap them (seeded pick, corpus order preserved)
            rng = np.random.default_rng(seed)
            keep = rng.choice(
                len(irrelevant_positions), size=max_irrelevant, replace=False
            )
            drop = set(irrelevant_positions) - {irrelevant_positions[i] for i in keep}
            rows = [r for i, r in enumerate(rows) if i not in drop]
        return rows

    def export_dataset(
        self,
        library: str,
        include_irrelevant: bool = False,
        seed: int = 0,
        test_fraction: float = 0.2,
        max_irrelevant: int | None = None,
    ) -> Dataset:
        snap = self.workspace.snapshot()
        lib = snap.resolve_library(library)
        rows = self._collect_labeled_rows(
            snap, lib, include_irrelevant, max_irrelevant=max_irrelevant, seed=seed
        )
        vectors = self._embed([text for _, text, _ in rows]) if rows else []
        return classifier.build_dataset(
            [
                (pid, text, vec.values, cats)
                for (pid, text, cats), vec in zip(rows, vectors)
            ],
            provider_id=self.provider.provider_id,
            model_id=self.provider.model_id,
            seed=seed,
            test_fraction=test_fraction,
        )

    def dataset_to_jsonl(self, dataset: Dataset, include_embeddings: bool = True) -> str:
        lines = []
        for record in dataset.records:
            payload = {
                "paragraph_id": record.paragraph_id,
                "text": record.text,
                "labels": [
                    classifier.CATEGORY_NAMES[j]
                    for j in range(classifier.NUM_CATEGORIES)
                    if record.label_vector[j]
                ],
            }
            if include_embeddings:
                payload["embedding"] = [float(x) for x in record.embedding]
            lines.append(json.dumps(payload, ensure_ascii=False))
        return "\n".join(lines) + "\n" if lines else ""

    def dataset_from_jsonl(
        self, text: str, seed: int = 0, test_fraction: float = 0.2
    ) -> Dataset:
        """Rebuild a Dataset from an export; re-embeds rows lacking vectors."""
        rows = []
        for line_no, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"bad dataset line {line_no}: {exc}") from exc
            rows.append(payload)
        embeddings: list[np.ndarray] = []
        missing = [i for i, row in enumerate(rows) if "embedding" not in row]
        fresh = iter(self._embed([rows[i]["text"] for i in missing]) if missing else [])
        for i, row in enumerate(rows):
            if "embedding" in row:
                embeddings.append(np.asarray(row["embedding"], dtype=np.float64))
            else:
                embeddings.append(np.asarray(next(fresh).values, dtype=np.float64))
        return classifier.build_dataset(
            [
                (
                    row["paragraph_id"],
                    row["text"],
                    emb,
                    {category_from_name(name) for name in row.get("labels", [])},
                )
                for row, emb in zip(rows, embeddings)
            ],
            provider_id=self.provider.provider_id,
            model_id=self.provider.model_id,
            seed=seed,
            test_fraction=test_fraction,
        )

    def train(
        self,
        library: str | None = None,
        dataset: Dataset | None = None,
        include_irrelevant: bool = False,
        seed: int = 0,
        test_fraction: float = 0.2,
        config: TrainConfig | None = None,
    ) -> TrainedModelRecord:
        """Train the four heads and persist the model with its test report."""
        if dataset is None:
            if library is None:
                raise InvalidInputError("train needs a library or a dataset")
            dataset = self.export_dataset(
                library,
                include_irrelevant=include_irrelevant,
                seed=seed,
                test_fraction=test_fraction,
            )
        config = config or TrainConfig(seed=seed)
        model = classifier.train(dataset, config)
        n_train = sum(1 for r in dataset.records if r.split == "train")
        n_test = len(dataset.records) - n_train
        report = classifier.evaluate(model, dataset) if n_test else None
        library_id = ""
        if library is not None:
            library_id = self.workspace.snapshot().resolve_library(library).id
        record = TrainedModelRecord(
            model=model,
            library_id=library_id,
            created_at=now_iso(),
            n_train=n_train,
            n_test=n_test,
            test_fraction=dataset.test_fraction,
            report=report,
        )
        self.workspace.save_model(record)
        return record

    def classifier_report(self) -> tuple[TrainedModelRecord, ClassificationReport]:
        record = self.workspace.current_model()
        if record.report is None:
            raise NotFoundError("current model has no evaluation report (empty test split)")
        return record, record.report

    def predict_paragraph(
        self, paragraph_id: str, threshold: float = 0.5
    ) -> tuple[np.ndarray, set[Category]]:
        record = self.workspace.current_model()
        self._check_model_space(record)
        snap = self.workspace.snapshot()
        para = snap.paragraph(paragraph_id)
        (vector,) = self._embed([para.text])
        return classifier.predict(record.model, vector, threshold)

    def _check_model_space(self, record: TrainedModelRecord) -> None:
        if (
            record.model.provider_id != self.provider.provider_id
            or record.model.model_id != self.provider.model_id
        ):
            raise ProviderMismatchError(
                f"model trained on ({record.model.provider_id}, {record.model.model_id}) "
                f"but the active provider is ({self.provider.provider_id}, "
                f"{self.provider.model_id})"
            )

    # ------------------------------------------------------------------ query

    def answer(
        self,
        question: str,
        source: QuerySource | str,
        scope: Scope,
        k: int = 5,
        threshold: float = 0.5,
    ) -> Answer:
        if isinstance(source, str):
            source = parse_query_source(source)
        if source.kind == "class":
            if scope.kind != "paper":
                raise InvalidInputError("classifier-filtered answers need a paper scope")
            return self.answer_from_classifier(
                question, scope.id, source.category, k=k, threshold=threshold
            )
        snap = self.workspace.snapshot()
        if source.kind == "semantic":
            hits = self._rank_spec(snap, retrieval.semantic_search_spec(question), scope, k)
        else:
            hits = self._rank_spec(snap, snap.spec(source.retrieval_id), scope, k)
        return self._answer_from_hits(snap, question, [h.paragraph_id for h in hits])

    def answer_from_classifier(
        self,
        question: str,
        paper_id: str,
        category: str,
        k: int = 5,
        threshold: float = 0.5,
    ) -> Answer:
        """Answer from the paragraphs the classifier assigns to a category,
        best-first; refuses locally when nothing is predicted positive."""
        record = self.workspace.current_model()
        self._check_model_space(record)
        cat = category_from_name(category)
        snap = self.workspace.snapshot()
        paras = snap.paper(paper_id).paragraphs()
        if not paras:
            return query_mod.refusal_answer(self.llm)
        vectors = self._embed([p.text for p in paras])
        scored = []
        for para, vec in zip(paras, vectors):
            probs, _ = classifier.predict(record.model, vec, threshold)
            if probs[int(cat)] >= threshold:
                scored.append((para.id, float(probs[int(cat)])))
        scored.sort(key=lambda item: -item[1])  # stable: ties keep paper order
        return self._answer_from_hits(snap, question, [pid for pid, _ in scored[:k]])

    def _answer_from_hits(
        self, snap: Snapshot, question: str, paragraph_ids: list[str]
    ) -> Answer:
        if not paragraph_ids:
            return query_mod.refusal_answer(self.llm)  # no provider call, no cost
        texts = [snap.paragraph(pid).text for pid in paragraph_ids]
        return query_mod.answer_with_passages(self.llm, question, texts, paragraph_ids)
