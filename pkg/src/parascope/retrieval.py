"""Customized retrievals: ensembles of positive/negative queries and
paragraphs combined into a single retrieval embedding, plus ranking.

The retrieval embedding is the weighted sum of the four ensemble means:

    R = a * mean(positive paragraphs) + b * mean(positive queries)
      - c * mean(negative paragraphs) - d * mean(negative queries)

Empty ensembles contribute the zero vector so retrievals can be built up
incrementally; R is never renormalized (cosine ranking is scale-invariant
anyway).
"""

from __future__ import annotations

import math
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .embedding import EmbeddingVector, cosine, format_similarity
from .errors import (
    DegenerateRetrievalError,
    EmptyRetrievalError,
    InvalidInputError,
    NotFoundError,
    ProviderMismatchError,
)
from .text import normalize_whitespace


class Polarity(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    CLEAR = "clear"


@dataclass
class Weights:
    """Ensemble weights: a scales positive paragraphs, b positive queries,
    c negative paragraphs, d negative queries."""

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    d: float = 1.0

    def validate(self) -> None:
        for name, value in vars(self).items():
            if not math.isfinite(value) or value < 0:
                raise InvalidInputError(f"weight {name} must be finite and >= 0, got {value}")


@dataclass
class RetrievalSpec:
    id: str
    name: str
    description: str | None = None
    category: str | None = None  # optional link to a classification category
    positive_queries: list[str] = field(default_factory=list)
    negative_queries: list[str] = field(default_factory=list)
    positive_paragraph_ids: list[str] = field(default_factory=list)
    negative_paragraph_ids: list[str] = field(default_factory=list)
    weights: Weights = field(default_factory=Weights)
    min_score: float | None = None  # optional cutoff, ships unset

    def validate(self) -> None:
        if not normalize_whitespace(self.name):
            raise InvalidInputError("retrieval name must be non-empty")
        self.weights.validate()
        pos, neg = set(self.positive_paragraph_ids), set(self.negative_paragraph_ids)
        overlap = pos & neg
        if overlap:
            raise InvalidInputError(
                f"paragraphs cannot be both positive and negative: {sorted(overlap)}"
            )
        qoverlap = set(self.positive_queries) & set(self.negative_queries)
        if qoverlap:
            raise InvalidInputError(
                f"queries cannot be both positive and negative: {sorted(qoverlap)}"
            )

    def is_rankable(self) -> bool:
        return bool(
            self.positive_queries
            or self.negative_queries
            or self.positive_paragraph_ids
            or self.negative_paragraph_ids
        )

    def apply_label(self, paragraph_id: str, polarity: Polarity) -> None:
        """Set ensemble membership; positive and negative are exclusive,
        repeated labels are idempotent (set semantics)."""
        in_pos = paragraph_id in self.positive_paragraph_ids
        in_neg = paragraph_id in self.negative_paragraph_ids
        if polarity is Polarity.POSITIVE:
            if in_neg:
                self.negative_paragraph_ids.remove(paragraph_id)
            if not in_pos:
                self.positive_paragraph_ids.append(paragraph_id)
        elif polarity is Polarity.NEGATIVE:
            if in_pos:
                self.positive_paragraph_ids.remove(paragraph_id)
            if not in_neg:
                self.negative_paragraph_ids.append(paragraph_id)
        else:
            if in_pos:
                self.positive_paragraph_ids.remove(paragraph_id)
            if in_neg:
                self.negative_paragraph_ids.remove(paragraph_id)


def new_retrieval_spec(
    name: str,
    description: str | None = None,
    category: str | None = None,
    positive_queries: Sequence[str] = (),
    negative_queries: Sequence[str] = (),
    weights: Weights | None = None,
) -> RetrievalSpec:
    spec = RetrievalSpec(
        id=uuid.uuid4().hex,
        name=name,
        description=description,
        category=category,
        positive_queries=list(positive_queries),
        negative_queries=list(negative_queries),
        weights=weights or Weights(),
    )
    spec.validate()
    return spec


@dataclass
class RankedHit:
    paragraph_id: str
    score: float
    display_score: str
    rank: int


def _ensemble_mean(
    vectors: list[EmbeddingVector], reference: EmbeddingVector
) -> np.ndarray:
    """Mean of an ensemble; the empty ensemble contributes the zero vector."""
    if not vectors:
        return np.zeros(reference.dim, dtype=np.float64)
    for v in vectors:
        if not v.same_space(reference):
            raise ProviderMismatchError(
                "retrieval mixes embeddings from different providers/models"
            )
    return np.mean([np.asarray(v.values, dtype=np.float64) for v in vectors], axis=0)


def compute_retrieval_embedding(
    spec: RetrievalSpec,
    paragraph_vectors: Mapping[str, EmbeddingVector],
    query_vectors: Mapping[str, EmbeddingVector],
) -> EmbeddingVector:
    """Weighted combination of the four ensemble means; not renormalized."""
    spec.validate()
    if not spec.is_rankable():
        raise EmptyRetrievalError(f"empty retrieval: {spec.name!r} has no ensembles")

    def para_vecs(ids: list[str]) -> list[EmbeddingVector]:
        out = []
        for pid in ids:
            if pid not in paragraph_vectors:
                raise NotFoundError(f"unknown paragraph id in retrieval: {pid}")
            out.append(paragraph_vectors[pid])
        return out

    def query_vecs(queries: list[str]) -> list[EmbeddingVector]:
        out = []
        for q in queries:
            if q not in query_vectors:
                raise NotFoundError(f"query not embedded: {q!r}")
            out.append(query_vectors[q])
        return out

    pool = (
        [paragraph_vectors[p] for p in spec.positive_paragraph_ids if p in paragraph_vectors]
        + [paragraph_vectors[p] for p in spec.negative_paragraph_ids if p in paragraph_vectors]
        + list(query_vectors.values())
    )
    if not pool:
        raise NotFoundError("no embeddings supplied for retrieval")
    reference = pool[0]

    w = spec.weights
    combined = (
        w.a * _ensemble_mean(para_vecs(spec.positive_paragraph_ids), reference)
        + w.b * _ensemble_mean(query_vecs(spec.positive_queries), reference)
        - w.c * _ensemble_mean(para_vecs(spec.negative_paragraph_ids), reference)
        - w.d * _ensemble_mean(query_vecs(spec.negative_queries), reference)
    )
    return EmbeddingVector(combined, reference.provider_id, reference.model_id)


def rank_candidates(
    retrieval_vector: EmbeddingVector,
    candidates: Sequence[tuple[str, EmbeddingVector]],
    k: int = 5,
    min_score: float | None = None,
) -> list[RankedHit]:
    """Top-k candidates by cosine against the retrieval embedding.

    `candidates` must already be in paper order: the sort is stable, so
    equal scores keep that order (the deterministic tie-break). Zero-norm
    candidates cannot be scored and are skipped; a zero-norm retrieval
    embedding is an error (exactly cancelling ensembles).
    """
    if k < 1:
        raise InvalidInputError(f"k must be a positive integer, got {k}")
    if retrieval_vector.degenerate:
        raise DegenerateRetrievalError(
            "degenerate retrieval embedding: ensembles cancel exactly"
        )
    scored = []
    for paragraph_id, vector in candidates:
        if vector.degenerate:
            continue
        scored.append((paragraph_id, cosine(retrieval_vector, vector)))
    scored.sort(key=lambda item: -item[1])  # stable: ties stay in paper order
    if min_score is not None:
        scored = [s for s in scored if s[1] >= min_score]
    return [
        RankedHit(
            paragraph_id=pid,
            score=score,
            display_score=format_similarity(score),
            rank=i + 1,
        )
        for i, (pid, score) in enumerate(scored[:k])
    ]


def semantic_search_spec(query: str) -> RetrievalSpec:
    """Anonymous single-positive-query retrieval backing plain semantic search."""
    query = normalize_whitespace(query)
    if not query:
        raise InvalidInputError("query must be non-empty")
    return RetrievalSpec(id="adhoc-" + uuid.uuid4().hex, name="semantic search",
                         positive_queries=[query])


def with_updated_paragraph_id(spec: RetrievalSpec, old_id: str, new_id: str) -> RetrievalSpec:
    """Copy of `spec` with a corrected paragraph's id migrated."""
    def swap(ids: list[str]) -> list[str]:
        return [new_id if pid == old_id else pid for pid in ids]

    return replace(
        spec,
        positive_paragraph_ids=swap(spec.positive_paragraph_ids),
        negative_paragraph_ids=swap(spec.negative_paragraph_ids),
    )
