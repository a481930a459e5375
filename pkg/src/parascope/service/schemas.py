"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class ErrorBody(BaseModel):
    code: str
    message: str


class ErrorEnvelope(BaseModel):
    error: ErrorBody


class LibraryCreate(BaseModel):
    name: str


class LibraryOut(BaseModel):
    id: str
    name: str
    created_at: str
    paper_count: int


class PaperUpload(BaseModel):
    """TEI upload ({"format": "tei", "content": "<xml>"}) or plain text
    ({"format": "text", "title": ..., "text": ...})."""

    format: Literal["tei", "text"]
    content: Optional[str] = None
    title: Optional[str] = None
    text: Optional[str] = None
    delimiter: Optional[str] = None
    original_uri: Optional[str] = None


class MetadataOut(BaseModel):
    title: str
    abstract: str
    authors: list[str]
    date: Optional[str]
    doi: Optional[str]


class ParagraphOut(BaseModel):
    id: str
    paper_id: str
    section_index: int
    para_index: int
    text: str
    edited: bool
    duplicate: bool


class SectionOut(BaseModel):
    heading: str
    paragraphs: list[ParagraphOut]


class SideRecordOut(BaseModel):
    kind: str
    text: str


class PaperOut(BaseModel):
    id: str
    metadata: MetadataOut
    sections: list[SectionOut]
    source_format: str
    needs_review: bool
    original_uri: Optional[str]
    side_records: list[SideRecordOut]


class PaperSummary(BaseModel):
    id: str
    title: str
    authors: list[str]
    date: Optional[str]
    doi: Optional[str]
    needs_review: bool
    paragraph_count: int


class UploadResult(BaseModel):
    paper: PaperOut
    created: bool


class CorrectionIn(BaseModel):
    text: str


class TextHit(BaseModel):
    paragraph: ParagraphOut
    spans: list[tuple[int, int]]


class RankedHitOut(BaseModel):
    rank: int
    paragraph_id: str
    score: float
    display_score: str
    text: str


class WeightsModel(BaseModel):
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    d: float = 1.0


class RetrievalCreate(BaseModel):
    name: str
    description: Optional[str] = None
    category: Optional[str] = None
    positive_queries: list[str] = Field(default_factory=list)
    negative_queries: list[str] = Field(default_factory=list)
    weights: Optional[WeightsModel] = None


class RetrievalUpdate(BaseModel):
    name: Optional[str] = None
    description: Optional[str] = None
    category: Optional[str] = None
    positive_queries: Optional[list[str]] = None
    negative_queries: Optional[list[str]] = None
    weights: Optional[WeightsModel] = None
    min_score: Optional[float] = None


class RetrievalOut(BaseModel):
    id: str
    name: str
    description: Optional[str]
    category: Optional[str]
    positive_queries: list[str]
    negative_queries: list[str]
    positive_paragraph_ids: list[str]
    negative_paragraph_ids: list[str]
    weights: WeightsModel
    min_score: Optional[float]


class LabelIn(BaseModel):
    paragraph_id: str
    polarity: Literal["positive", "negative", "clear"]


class EmbeddingOut(BaseModel):
    """The computed retrieval embedding, exposed for inspection."""

    provider_id: str
    model_id: str
    dim: int
    values: list[float]
    norm: float


class ParagraphLabelsIn(BaseModel):
    categories: list[str] = Field(default_factory=list)
    irrelevant: bool = False


class ParagraphLabelsOut(BaseModel):
    paragraph_id: str
    categories: list[str]
    irrelevant: bool


class QueryIn(BaseModel):
    query: str
    source: str = "semantic"  # "semantic" | "retrieval:<id>" | "class:<category>"
    scope: str
    k: int = 5
    threshold: float = 0.5


class PassageOut(BaseModel):
    index: int
    paragraph_id: str
    text: str


class AnswerOut(BaseModel):
    text: str
    used_passages: list[PassageOut]
    refused: bool
    provider_id: str
    model_id: str


class TrainIn(BaseModel):
    library: str
    seed: int = 0
    test_fraction: float = 0.2
    include_irrelevant: bool = False
    epochs: int = 500
    learning_rate: float = 0.1
    l2: float = 1e-4


class JobOut(BaseModel):
    id: str
    kind: str
    status: Literal["pending", "running", "done", "error"]
    result: Optional[dict] = None
    error: Optional[ErrorBody] = None


class MetricRowOut(BaseModel):
    precision: float
    recall: float
    f1: float
    support: int
    zero_division: bool


class ReportOut(BaseModel):
    model_id: str
    library_id: str
    created_at: str
    n_train: int
    n_test: int
    classes: dict[str, MetricRowOut]
    averages: dict[str, MetricRowOut]
    total_support: int
    degenerate_heads: list[int]
    text: str


class PredictIn(BaseModel):
    paragraph_id: str
    threshold: float = 0.5


class PredictOut(BaseModel):
    paragraph_id: str
    probabilities: dict[str, float]
    labels: list[str]
