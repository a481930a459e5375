"""HTTP API exposing the full workbench workflow.

Endpoints are pure projections of workbench results: validation and
serialization only, no endpoint-local logic. Long jobs (training, bulk
embedding) run as background tasks polled via /jobs/{id}.
"""

from __future__ import annotations

import logging
import threading
import uuid
from contextlib import asynccontextmanager

from fastapi import Depends, FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import classifier
from ..classifier import TrainConfig, format_report
from ..config import Settings, load_settings
from ..corpus import Paper, Paragraph
from ..errors import (
    InvalidInputError,
    NotFoundError,
    UnauthorizedError,
    WorkbenchError,
)
from ..query import Answer
from ..retrieval import RankedHit, RetrievalSpec, Weights
from ..store import Scope, TrainedModelRecord, parse_scope
from ..workbench import Workbench
from . import schemas

logger = logging.getLogger(__name__)


def _paragraph_out(p: Paragraph) -> dict:
    return {
        "id": p.id,
        "paper_id": p.paper_id,
        "section_index": p.section_index,
        "para_index": p.para_index,
        "text": p.text,
        "edited": p.edited,
        "duplicate": p.duplicate,
    }


def _paper_out(paper: Paper) -> dict:
    return {
        "id": paper.id,
        "metadata": {
            "title": paper.metadata.title,
            "abstract": paper.metadata.abstract,
            "authors": paper.metadata.authors,
            "date": paper.metadata.date,
            "doi": paper.metadata.doi,
        },
        "sections": [
            {"heading": s.heading, "paragraphs": [_paragraph_out(p) for p in s.paragraphs]}
            for s in paper.sections
        ],
        "source_format": paper.source_format,
        "needs_review": paper.needs_review,
        "original_uri": paper.original_uri,
        "side_records": [{"kind": r.kind, "text": r.text} for r in paper.side_records],
    }


def _paper_summary(paper: Paper) -> dict:
    return {
        "id": paper.id,
        "title": paper.metadata.title,
        "authors": paper.metadata.authors,
        "date": paper.metadata.date,
        "doi": paper.metadata.doi,
        "needs_review": paper.needs_review,
        "paragraph_count": len(paper.paragraphs()),
    }


def _spec_out(spec: RetrievalSpec) -> dict:
    return {
        "id": spec.id,
        "name": spec.name,
        "description": spec.description,
        "category": spec.category,
        "positive_queries": spec.positive_queries,
        "negative_queries": spec.negative_queries,
        "positive_paragraph_ids": spec.positive_paragraph_ids,
        "negative_paragraph_ids": spec.negative_paragraph_ids,
        "weights": vars(spec.weights),
        "min_score": spec.min_score,
    }


def _hits_out(hits: list[RankedHit], wb: Workbench) -> list[dict]:
    snap = wb.workspace.snapshot()
    return [
        {
            "rank": h.rank,
            "paragraph_id": h.paragraph_id,
            "score": h.score,
            "display_score": h.display_score,
            "text": snap.paragraph(h.paragraph_id).text,
        }
        for h in hits
    ]


def _answer_out(answer: Answer) -> dict:
    return {
        "text": answer.text,
        "used_passages": [
            {"index": p.index, "paragraph_id": p.paragraph_id, "text": p.text}
            for p in answer.used_passages
        ],
        "refused": answer.refused,
        "provider_id": answer.provider_id,
        "model_id": answer.model_id,
    }


def _report_out(record: TrainedModelRecord) -> dict:
    report = record.report
    if report is None:
        raise NotFoundError("current model has no evaluation report (empty test split)")
    payload = report.to_dict()
    return {
        "model_id": record.model.id,
        "library_id": record.library_id,
        "created_at": record.created_at,
        "n_train": record.n_train,
        "n_test": record.n_test,
        "classes": payload["classes"],
        "averages": payload["averages"],
        "total_support": payload["total_support"],
        "degenerate_heads": record.model.degenerate_heads,
        "text": format_report(report),
    }


class JobRegistry:
    """Minimal in-process registry for background jobs."""

    def __init__(self):
        self._jobs: dict[str, dict] = {}
        self._lock = threading.Lock()

    def submit(self, kind: str, fn) -> str:
        job_id = uuid.uuid4().hex
        with self._lock:
            self._jobs[job_id] = {"id": job_id, "kind": kind, "status": "pending",
                                  "result": None, "error": None}

        def run():
            with self._lock:
                self._jobs[job_id]["status"] = "running"
            try:
                result = fn()
                with self._lock:
                    self._jobs[job_id].update(status="done", result=result)
            except WorkbenchError as exc:
                with self._lock:
                    self._jobs[job_id].update(
                        status="error", error={"code": exc.code, "message": exc.message}
                    )
            except Exception as exc:  # pragma: no cover - defensive
                logger.exception("job %s failed", job_id)
                with self._lock:
                    self._jobs[job_id].update(
                        status="error", error={"code": "internal", "message": str(exc)}
                    )

        threading.Thread(target=run, daemon=True).start()
        return job_id

    def get(self, job_id: str) -> dict:
        with self._lock:
            if job_id not in self._jobs:
                raise NotFoundError(f"unknown job id: {job_id}")
            return dict(self._jobs[job_id])


def create_app(settings: Settings | None = None, workbench: Workbench | None = None) -> FastAPI:
    settings = settings or load_settings()
    own_workbench = workbench is None

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        wb = workbench or Workbench.from_settings(settings)
        app.state.workbench = wb
        try:
            yield
        finally:
            if own_workbench:
                wb.close()

    app = FastAPI(
        title="parascope",
        version="0.1.0",
        description="Paragraph-level retrieval, labeling, classification and QA over "
        "scientific papers.",
        lifespan=lifespan,
    )
    app.add_middleware(
        CORSMiddleware,
        allow_origins=settings.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    jobs = JobRegistry()

    @app.exception_handler(WorkbenchError)
    async def workbench_error_handler(request: Request, exc: WorkbenchError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    def wb() -> Workbench:
        return app.state.workbench

    async def require_auth(request: Request) -> None:
        token = settings.api_token
        if token is None:
            return
        header = request.headers.get("Authorization", "")
        if header != f"Bearer {token}":
            raise UnauthorizedError("missing or invalid bearer token")

    auth = Depends(require_auth)

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    # ------------------------------------------------------------- libraries

    @app.post("/libraries", response_model=schemas.LibraryOut, status_code=201,
              dependencies=[auth])
    async def create_library(body: schemas.LibraryCreate):
        library = wb().create_library(body.name)
        return {"id": library.id, "name": library.name,
                "created_at": library.created_at, "paper_count": 0}

    @app.get("/libraries", response_model=list[schemas.LibraryOut], dependencies=[auth])
    async def list_libraries(limit: int = Query(100, ge=1), offset: int = Query(0, ge=0)):
        libraries = wb().list_libraries()[offset : offset + limit]
        return [
            {"id": l.id, "name": l.name, "created_at": l.created_at,
             "paper_count": len(l.paper_ids)}
            for l in libraries
        ]

    @app.get("/libraries/{library_id}/papers", response_model=list[schemas.PaperSummary],
             dependencies=[auth])
    async def list_papers(library_id: str, limit: int = Query(100, ge=1),
                          offset: int = Query(0, ge=0)):
        papers = wb().list_papers(library_id)[offset : offset + limit]
        return [_paper_summary(p) for p in papers]

    @app.post("/libraries/{library_id}/papers", response_model=schemas.UploadResult,
              status_code=201, dependencies=[auth])
    async def upload_paper(library_id: str, body: schemas.PaperUpload):
        if body.format == "tei":
            if not body.content:
                raise InvalidInputError("TEI upload requires 'content'")
            paper, created = wb().ingest_tei(
                library_id, body.content.encode("utf-8"), body.original_uri
            )
        else:
            if body.text is None:
                raise InvalidInputError("text upload requires 'text'")
            paper, created = wb().ingest_plaintext(
                library_id, body.title or "", body.text, body.delimiter, body.original_uri
            )
        return {"paper": _paper_out(paper), "created": created}

    @app.get("/papers/{paper_id}", response_model=schemas.PaperOut, dependencies=[auth])
    async def get_paper(paper_id: str):
        return _paper_out(wb().get_paper(paper_id))

    @app.patch("/paragraphs/{paragraph_id}", response_model=schemas.ParagraphOut,
               dependencies=[auth])
    async def correct_paragraph(paragraph_id: str, body: schemas.CorrectionIn):
        return _paragraph_out(wb().correct_paragraph(paragraph_id, body.text))

    @app.put("/paragraphs/{paragraph_id}/labels", response_model=schemas.ParagraphLabelsOut,
             dependencies=[auth])
    async def set_paragraph_labels(paragraph_id: str, body: schemas.ParagraphLabelsIn):
        record = wb().set_paragraph_labels(paragraph_id, body.categories, body.irrelevant)
        return {
            "paragraph_id": record.paragraph_id,
            "categories": sorted(c.name.lower() for c in record.labels),
            "irrelevant": record.irrelevant,
        }

    # ---------------------------------------------------------------- search

    def _search(scope: Scope, mode: str, q: str, k: int, case_sensitive: bool):
        if mode == "text":
            hits = wb().text_search(scope, q, case_sensitive)
            return {
                "mode": "text",
                "hits": [
                    {"paragraph": _paragraph_out(p), "spans": spans} for p, spans in hits
                ],
            }
        if mode == "semantic":
            hits = wb().semantic_search(q, scope, k)
            return {"mode": "semantic", "hits": _hits_out(hits, wb())}
        raise InvalidInputError(f"mode must be 'text' or 'semantic', got {mode!r}")

    @app.get("/papers/{paper_id}/search", dependencies=[auth])
    async def search_paper(paper_id: str, q: str, mode: str = "text", k: int = 5,
                           case_sensitive: bool = False):
        return _search(Scope("paper", paper_id), mode, q, k, case_sensitive)

    @app.get("/libraries/{library_id}/search", dependencies=[auth])
    async def search_library(library_id: str, q: str, mode: str = "text", k: int = 5,
                             case_sensitive: bool = False):
        return _search(Scope("library", library_id), mode, q, k, case_sensitive)

    # ------------------------------------------------------------ retrievals

    @app.post("/retrievals", response_model=schemas.RetrievalOut, status_code=201,
              dependencies=[auth])
    async def create_retrieval(body: schemas.RetrievalCreate):
        weights = Weights(**body.weights.model_dump()) if body.weights else None
        spec = wb().create_retrieval(
            name=body.name,
            description=body.description,
            category=body.category,
            positive_queries=body.positive_queries,
            negative_queries=body.negative_queries,
            weights=weights,
        )
        return _spec_out(spec)

    @app.get("/retrievals", response_model=list[schemas.RetrievalOut], dependencies=[auth])
    async def list_retrievals(limit: int = Query(100, ge=1), offset: int = Query(0, ge=0)):
        return [_spec_out(s) for s in wb().list_retrievals()[offset : offset + limit]]

    @app.post("/retrievals/import-defaults", response_model=list[schemas.RetrievalOut],
              dependencies=[auth])
    async def import_defaults():
        return [_spec_out(s) for s in wb().import_default_retrievals()]

    @app.get("/retrievals/{spec_id}", response_model=schemas.RetrievalOut,
             dependencies=[auth])
    async def get_retrieval(spec_id: str):
        return _spec_out(wb().get_retrieval(spec_id))

    @app.patch("/retrievals/{spec_id}", response_model=schemas.RetrievalOut,
               dependencies=[auth])
    async def update_retrieval(spec_id: str, body: schemas.RetrievalUpdate):
        spec = wb().get_retrieval(spec_id)
        if body.name is not None:
            spec.name = body.name
        if body.description is not None:
            spec.description = body.description
        if body.category is not None:
            spec.category = body.category or None
        if body.positive_queries is not None:
            spec.positive_queries = body.positive_queries
        if body.negative_queries is not None:
            spec.negative_queries = body.negative_queries
        if body.weights is not None:
            spec.weights = Weights(**body.weights.model_dump())
        if body.min_score is not None:
            spec.min_score = body.min_score
        return _spec_out(wb().update_retrieval(spec))

    @app.post("/retrievals/{spec_id}/labels", response_model=schemas.RetrievalOut,
              dependencies=[auth])
    async def label_paragraph(spec_id: str, body: schemas.LabelIn):
        spec = wb().label_retrieval_paragraph(spec_id, body.paragraph_id, body.polarity)
        return _spec_out(spec)

    @app.get("/retrievals/{spec_id}/rank", response_model=list[schemas.RankedHitOut],
             dependencies=[auth])
    async def rank(spec_id: str, scope: str, k: int = 5):
        hits = wb().rank(wb().get_retrieval(spec_id).id, parse_scope(scope), k)
        return _hits_out(hits, wb())

    @app.get("/retrievals/{spec_id}/embedding", response_model=schemas.EmbeddingOut,
             dependencies=[auth])
    async def retrieval_embedding(spec_id: str):
        vector = wb().retrieval_embedding(wb().get_retrieval(spec_id).id)
        values = [float(x) for x in vector.values]
        return {
            "provider_id": vector.provider_id,
            "model_id": vector.model_id,
            "dim": vector.dim,
            "values": values,
            "norm": float(sum(x * x for x in values) ** 0.5),
        }

    # ----------------------------------------------------------------- query

    @app.post("/query", response_model=schemas.AnswerOut, dependencies=[auth])
    async def run_query(body: schemas.QueryIn):
        answer = wb().answer(
            body.query, body.source, parse_scope(body.scope), k=body.k,
            threshold=body.threshold,
        )
        return _answer_out(answer)

    # ------------------------------------------------------------ classifier

    @app.get("/datasets/export", response_class=PlainTextResponse, dependencies=[auth])
    async def export_dataset(library: str, seed: int = 0, test_fraction: float = 0.2,
                             include_irrelevant: bool = False,
                             max_irrelevant: int | None = None,
                             include_embeddings: bool = True):
        dataset = wb().export_dataset(
            library, include_irrelevant=include_irrelevant, seed=seed,
            test_fraction=test_fraction, max_irrelevant=max_irrelevant,
        )
        return PlainTextResponse(
            wb().dataset_to_jsonl(dataset, include_embeddings),
            media_type="application/jsonl",
        )

    @app.post("/classifier/train", response_model=schemas.JobOut, status_code=202,
              dependencies=[auth])
    async def train(body: schemas.TrainIn):
        def run():
            record = wb().train(
                library=body.library,
                include_irrelevant=body.include_irrelevant,
                seed=body.seed,
                test_fraction=body.test_fraction,
                config=TrainConfig(
                    learning_rate=body.learning_rate,
                    epochs=body.epochs,
                    l2=body.l2,
                    seed=body.seed,
                ),
            )
            out = {"model_id": record.model.id, "n_train": record.n_train,
                   "n_test": record.n_test}
            if record.report is not None:
                out["report"] = record.report.to_dict()
            return out

        job_id = jobs.submit("train", run)
        return jobs.get(job_id)

    @app.get("/jobs/{job_id}", response_model=schemas.JobOut, dependencies=[auth])
    async def get_job(job_id: str):
        return jobs.get(job_id)

    @app.get("/classifier/report", response_model=schemas.ReportOut, dependencies=[auth])
    async def classifier_report():
        record, _ = wb().classifier_report()
        return _report_out(record)

    @app.post("/classifier/predict", response_model=schemas.PredictOut, dependencies=[auth])
    async def predict(body: schemas.PredictIn):
        probs, labels = wb().predict_paragraph(body.paragraph_id, body.threshold)
        return {
            "paragraph_id": body.paragraph_id,
            "probabilities": {
                name: float(probs[i]) for i, name in enumerate(classifier.CATEGORY_NAMES)
            },
            "labels": sorted(c.name.lower() for c in labels),
        }

    return app
