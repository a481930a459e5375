"""Command-line driver for every workflow step.

Runs in local mode by default (operating the workspace directly, zero
network); `serve` starts the HTTP API for the web UI and remote clients.
Every command supports --json for machine-readable output.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .classifier import CATEGORY_NAMES, TrainConfig, format_report
from .config import load_settings
from .errors import WorkbenchError
from .retrieval import Weights
from .store import Scope, parse_scope
from .workbench import Workbench


def _excerpt(text: str, width: int = 72) -> str:
    return text if len(text) <= width else text[: width - 1] + "…"


class Context:
    def __init__(self, workspace: str | None, config: str | None, as_json: bool):
        self.settings = load_settings(config)
        if workspace:
            self.settings.workspace = workspace
        self.as_json = as_json
        self._workbench: Workbench | None = None

    @property
    def wb(self) -> Workbench:
        if self._workbench is None:
            self._workbench = Workbench.from_settings(self.settings)
        return self._workbench

    def close(self) -> None:
        if self._workbench is not None:
            self._workbench.close()

    def emit(self, payload, text: str | None = None) -> None:
        if self.as_json:
            click.echo(json.dumps(payload, ensure_ascii=False, indent=2))
        else:
            click.echo(text if text is not None else json.dumps(payload, ensure_ascii=False))


pass_context = click.make_pass_decorator(Context)


@click.group()
@click.option("--workspace", "-w", envvar="PARASCOPE_WORKSPACE", default=None,
              help="Workspace directory (default ./workspace or $PARASCOPE_WORKSPACE).")
@click.option("--config", "-c", envvar="PARASCOPE_CONFIG", default=None,
              help="JSON config file.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def cli(ctx, workspace, config, as_json):
    """Paragraph-level retrieval, labeling, classification and QA over papers."""
    ctx.obj = Context(workspace, config, as_json)
    ctx.call_on_close(ctx.obj.close)


def main() -> None:
    try:
        cli(standalone_mode=False)
    except WorkbenchError as exc:
        click.echo(f"error [{exc.code}]: {exc.message}", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)


# ------------------------------------------------------------------ libraries

@cli.group()
def library():
    """Manage paper libraries."""


@library.command("create")
@click.argument("name")
@pass_context
def library_create(ctx, name):
    lib = ctx.wb.create_library(name)
    ctx.emit({"id": lib.id, "name": lib.name, "created_at": lib.created_at},
             f"created library {lib.id} ({lib.name})")


@library.command("list")
@pass_context
def library_list(ctx):
    libs = ctx.wb.list_libraries()
    payload = [
        {"id": l.id, "name": l.name, "created_at": l.created_at,
         "paper_count": len(l.paper_ids)}
        for l in libs
    ]
    lines = [f"{l.id}  {len(l.paper_ids):>4} papers  {l.name}" for l in libs]
    ctx.emit(payload, "\n".join(lines) if lines else "no libraries")


@cli.command()
@click.argument("library")
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--title", default=None, help="Title for plain-text ingests.")
@pass_context
def ingest(ctx, library, files, title):
    """Ingest TEI XML (.xml/.tei) or plain-text files into LIBRARY."""
    lib = ctx.wb.get_library(library)
    results = []
    for path in files:
        p = Path(path)
        if p.suffix.lower() in (".xml", ".tei"):
            paper, created = ctx.wb.ingest_tei(lib.id, p.read_bytes(), original_uri=str(p))
        else:
            paper, created = ctx.wb.ingest_plaintext(
                lib.id, title or p.stem, p.read_text(encoding="utf-8"),
                original_uri=str(p),
            )
        results.append({
            "paper_id": paper.id,
            "title": paper.metadata.title,
            "sections": len(paper.sections),
            "paragraphs": len(paper.paragraphs()),
            "needs_review": paper.needs_review,
            "created": created,
        })
    lines = [
        f"{'ingested' if r['created'] else 'already present'} {r['paper_id']}  "
        f"{r['sections']} sections, {r['paragraphs']} paragraphs  {r['title']}"
        for r in results
    ]
    ctx.emit(results, "\n".join(lines))


@cli.group()
def paper():
    """Inspect papers."""


@paper.command("list")
@click.argument("library")
@pass_context
def paper_list(ctx, library):
    lib = ctx.wb.get_library(library)
    papers = ctx.wb.list_papers(lib.id)
    payload = [
        {"id": p.id, "title": p.metadata.title, "authors": p.metadata.authors,
         "date": p.metadata.date, "needs_review": p.needs_review,
         "paragraphs": len(p.paragraphs())}
        for p in papers
    ]
    lines = [f"{p.id}  {len(p.paragraphs()):>4} paras  {p.metadata.title}" for p in papers]
    ctx.emit(payload, "\n".join(lines) if lines else "no papers")


@paper.command("show")
@click.argument("paper_id")
@pass_context
def paper_show(ctx, paper_id):
    p = ctx.wb.get_paper(paper_id)
    payload = {
        "id": p.id,
        "metadata": vars(p.metadata),
        "source_format": p.source_format,
        "needs_review": p.needs_review,
        "sections": [
            {
                "heading": s.heading,
                "paragraphs": [
                    {"id": q.id, "section_index": q.section_index,
                     "para_index": q.para_index, "text": q.text,
                     "edited": q.edited, "duplicate": q.duplicate}
                    for q in s.paragraphs
                ],
            }
            for s in p.sections
        ],
    }
    lines = [f"{p.metadata.title} ({p.id})"]
    for s in p.sections:
        lines.append(f"\n## {s.heading or '(untitled)'}")
        for q in s.paragraphs:
            lines.append(f"  {q.id}  {_excerpt(q.text)}")
    ctx.emit(payload, "\n".join(lines))


@cli.command()
@click.argument("paragraph_id")
@click.argument("new_text")
@pass_context
def correct(ctx, paragraph_id, new_text):
    """Replace a paragraph's text (issues a new content-addressed id)."""
    para = ctx.wb.correct_paragraph(paragraph_id, new_text)
    ctx.emit({"id": para.id, "text": para.text, "edited": para.edited},
             f"paragraph now {para.id} (edited={para.edited})")


# --------------------------------------------------------------------- search

def _emit_hits(ctx, hits):
    payload = [
        {"rank": h.rank, "score": h.score, "display_score": h.display_score,
         "paragraph_id": h.paragraph_id,
         "text": ctx.wb.workspace.snapshot().paragraph(h.paragraph_id).text}
        for h in hits
    ]
    lines = [
        f"{h.rank:>2}  {h.display_score:>6}  {h.paragraph_id}  "
        f"{_excerpt(ctx.wb.workspace.snapshot().paragraph(h.paragraph_id).text)}"
        for h in hits
    ]
    ctx.emit(payload, "\n".join(lines) if lines else "no hits")


@cli.command()
@click.argument("paper_id")
@click.option("--mode", type=click.Choice(["text", "semantic"]), default="text")
@click.option("-q", "--query", "needle", required=True)
@click.option("-k", default=5, show_default=True)
@click.option("--case-sensitive", is_flag=True)
@pass_context
def search(ctx, paper_id, mode, needle, k, case_sensitive):
    """Text or semantic search within one paper."""
    scope = Scope("paper", paper_id)
    if mode == "text":
        results = ctx.wb.text_search(scope, needle, case_sensitive)
        payload = [
            {"paragraph_id": p.id, "spans": spans, "text": p.text}
            for p, spans in results
        ]
        lines = [
            f"{p.id}  {len(spans)} match(es)  {_excerpt(p.text)}"
            for p, spans in results
        ]
        ctx.emit(payload, "\n".join(lines) if lines else "no matches")
    else:
        _emit_hits(ctx, ctx.wb.semantic_search(needle, scope, k))


# ------------------------------------------------------------------ retrieval

@cli.group()
def retrieval():
    """Create, inspect, label and rank customized retrievals."""


@retrieval.command("create")
@click.argument("name")
@click.option("--description", default=None)
@click.option("--category", default=None,
              type=click.Choice(CATEGORY_NAMES), required=False)
@click.option("--pos-query", "positive_queries", multiple=True)
@click.option("--neg-query", "negative_queries", multiple=True)
@click.option("--weights", default=None, help="Four comma-separated values: a,b,c,d.")
@pass_context
def retrieval_create(ctx, name, description, category, positive_queries,
                     negative_queries, weights):
    parsed = None
    if weights:
        a, b, c, d = (float(x) for x in weights.split(","))
        parsed = Weights(a, b, c, d)
    spec = ctx.wb.create_retrieval(
        name, description=description, category=category,
        positive_queries=list(positive_queries),
        negative_queries=list(negative_queries), weights=parsed,
    )
    ctx.emit(_spec_payload(spec), f"created retrieval {spec.id} ({spec.name})")


def _spec_payload(spec):
    return {
        "id": spec.id, "name": spec.name, "description": spec.description,
        "category": spec.category,
        "positive_queries": spec.positive_queries,
        "negative_queries": spec.negative_queries,
        "positive_paragraph_ids": spec.positive_paragraph_ids,
        "negative_paragraph_ids": spec.negative_paragraph_ids,
        "weights": vars(spec.weights), "min_score": spec.min_score,
    }


@retrieval.command("list")
@pass_context
def retrieval_list(ctx):
    specs = ctx.wb.list_retrievals()
    payload = [_spec_payload(s) for s in specs]
    lines = [f"{s.id}  {s.name}  (category: {s.category or '-'})" for s in specs]
    ctx.emit(payload, "\n".join(lines) if lines else "no retrievals")


@retrieval.command("show")
@click.argument("retrieval_ref")
@pass_context
def retrieval_show(ctx, retrieval_ref):
    spec = ctx.wb.get_retrieval(retrieval_ref)
    text = [f"{spec.name} ({spec.id})"]
    if spec.description:
        text.append(spec.description)
    text.append(f"category: {spec.category or '-'}   weights: {vars(spec.weights)}")
    for label, items in (
        ("positive queries", spec.positive_queries),
        ("negative queries", spec.negative_queries),
        ("positive paragraphs", spec.positive_paragraph_ids),
        ("negative paragraphs", spec.negative_paragraph_ids),
    ):
        text.append(f"{label}:")
        text.extend(f"  - {item}" for item in items)
    ctx.emit(_spec_payload(spec), "\n".join(text))


@retrieval.command("import-defaults")
@pass_context
def retrieval_import_defaults(ctx):
    specs = ctx.wb.import_default_retrievals()
    ctx.emit([_spec_payload(s) for s in specs],
             "\n".join(f"{s.id}  {s.name}" for s in specs))


@retrieval.command("label")
@click.argument("retrieval_ref")
@click.option("--pos", "positives", multiple=True, help="Paragraph id to mark positive.")
@click.option("--neg", "negatives", multiple=True, help="Paragraph id to mark negative.")
@click.option("--clear", "cleared", multiple=True, help="Paragraph id to unlabel.")
@pass_context
def retrieval_label(ctx, retrieval_ref, positives, negatives, cleared):
    spec = ctx.wb.get_retrieval(retrieval_ref)
    for pid in positives:
        spec = ctx.wb.label_retrieval_paragraph(spec.id, pid, "positive")
    for pid in negatives:
        spec = ctx.wb.label_retrieval_paragraph(spec.id, pid, "negative")
    for pid in cleared:
        spec = ctx.wb.label_retrieval_paragraph(spec.id, pid, "clear")
    ctx.emit(_spec_payload(spec),
             f"{spec.name}: {len(spec.positive_paragraph_ids)} positive, "
             f"{len(spec.negative_paragraph_ids)} negative paragraphs")


@retrieval.command("rank")
@click.argument("retrieval_ref")
@click.option("--scope", required=True, help="library:<id> or paper:<id>.")
@click.option("-k", default=5, show_default=True)
@pass_context
def retrieval_rank(ctx, retrieval_ref, scope, k):
    spec = ctx.wb.get_retrieval(retrieval_ref)
    _emit_hits(ctx, ctx.wb.rank(spec.id, parse_scope(scope), k))


# --------------------------------------------------------------------- labels

@cli.command()
@click.argument("paragraph_id")
@click.option("--category", "categories", multiple=True, type=click.Choice(CATEGORY_NAMES))
@click.option("--irrelevant", is_flag=True)
@pass_context
def label(ctx, paragraph_id, categories, irrelevant):
    """Set explicit category labels (or the irrelevant flag) on a paragraph."""
    record = ctx.wb.set_paragraph_labels(paragraph_id, list(categories), irrelevant)
    names = sorted(c.name.lower() for c in record.labels)
    ctx.emit({"paragraph_id": record.paragraph_id, "categories": names,
              "irrelevant": record.irrelevant},
             f"{record.paragraph_id}: {names or ('irrelevant' if record.irrelevant else 'cleared')}")


# ------------------------------------------------------------------ classifier

@cli.group()
def dataset():
    """Dataset export."""


@dataset.command("export")
@click.option("--library", required=True)
@click.option("-o", "--output", type=click.Path(), default=None,
              help="Write JSONL here (default stdout).")
@click.option("--seed", default=0, show_default=True)
@click.option("--test-fraction", default=0.2, show_default=True)
@click.option("--include-irrelevant", is_flag=True)
@click.option("--max-irrelevant", type=int, default=None,
              help="Down-sample irrelevant rows to at most this many.")
@click.option("--no-embeddings", is_flag=True, help="Omit embedding vectors.")
@pass_context
def dataset_export(ctx, library, output, seed, test_fraction, include_irrelevant,
                   max_irrelevant, no_embeddings):
    ds = ctx.wb.export_dataset(
        library, include_irrelevant=include_irrelevant, seed=seed,
        test_fraction=test_fraction, max_irrelevant=max_irrelevant,
    )
    jsonl = ctx.wb.dataset_to_jsonl(ds, include_embeddings=not no_embeddings)
    if output:
        Path(output).write_text(jsonl, encoding="utf-8")
        ctx.emit({"records": len(ds.records), "path": output},
                 f"wrote {len(ds.records)} records to {output}")
    else:
        click.echo(jsonl, nl=False)


@cli.command()
@click.option("--library", default=None)
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), default=None,
              help="Train from an exported JSONL instead of a library.")
@click.option("--seed", default=0, show_default=True)
@click.option("--test-fraction", default=0.2, show_default=True)
@click.option("--include-irrelevant", is_flag=True)
@click.option("--epochs", default=500, show_default=True)
@click.option("--learning-rate", default=0.1, show_default=True)
@click.option("--l2", default=1e-4, show_default=True)
@pass_context
def train(ctx, library, dataset_path, seed, test_fraction, include_irrelevant,
          epochs, learning_rate, l2):
    """Train the per-category sigmoid heads and store the model + report."""
    config = TrainConfig(learning_rate=learning_rate, epochs=epochs, l2=l2, seed=seed)
    ds = None
    if dataset_path:
        ds = ctx.wb.dataset_from_jsonl(
            Path(dataset_path).read_text(encoding="utf-8"), seed=seed,
            test_fraction=test_fraction,
        )
    record = ctx.wb.train(
        library=library, dataset=ds, include_irrelevant=include_irrelevant,
        seed=seed, test_fraction=test_fraction, config=config,
    )
    payload = {
        "model_id": record.model.id,
        "n_train": record.n_train,
        "n_test": record.n_test,
        "degenerate_heads": record.model.degenerate_heads,
        "weights": record.model.weights.tolist(),
        "biases": record.model.biases.tolist(),
    }
    if record.report is not None:
        payload["report"] = record.report.to_dict()
    text = (f"trained model {record.model.id} on {record.n_train} records "
            f"({record.n_test} held out)")
    if record.report is not None:
        text += "\n" + format_report(record.report)
    ctx.emit(payload, text)


@cli.command()
@pass_context
def report(ctx):
    """Print the stored classification report for the current model."""
    record, rep = ctx.wb.classifier_report()
    payload = {"model_id": record.model.id, "created_at": record.created_at,
               **rep.to_dict()}
    ctx.emit(payload, format_report(rep))


@cli.command()
@click.argument("paragraph_id")
@click.option("--threshold", default=0.5, show_default=True)
@pass_context
def predict(ctx, paragraph_id, threshold):
    """Predict categories for a stored paragraph with the current model."""
    probs, labels = ctx.wb.predict_paragraph(paragraph_id, threshold)
    names = sorted(c.name.lower() for c in labels)
    payload = {
        "paragraph_id": paragraph_id,
        "probabilities": {name: float(probs[i]) for i, name in enumerate(CATEGORY_NAMES)},
        "labels": names,
    }
    probs_text = "  ".join(f"{n}={probs[i]:.3f}" for i, n in enumerate(CATEGORY_NAMES))
    ctx.emit(payload, f"{probs_text}\nlabels: {names or '(none)'}")


# ---------------------------------------------------------------------- query

@cli.command()
@click.option("-q", "--query", "question", required=True)
@click.option("--source", default="semantic", show_default=True,
              help="semantic | retrieval:<id> | class:<category>.")
@click.option("--scope", required=True, help="library:<id> or paper:<id>.")
@click.option("-k", default=5, show_default=True)
@click.option("--threshold", default=0.5, show_default=True)
@pass_context
def query(ctx, question, source, scope, k, threshold):
    """Ask a question answered from retrieved passages."""
    if source.startswith("retrieval:"):
        source = "retrieval:" + ctx.wb.get_retrieval(source.split(":", 1)[1]).id
    answer = ctx.wb.answer(question, source, parse_scope(scope), k=k, threshold=threshold)
    payload = {
        "text": answer.text,
        "refused": answer.refused,
        "used_passages": [
            {"index": p.index, "paragraph_id": p.paragraph_id, "text": p.text}
            for p in answer.used_passages
        ],
    }
    lines = [answer.text, ""]
    for p in answer.used_passages:
        lines.append(f"[{p.index}] {p.paragraph_id}  {_excerpt(p.text)}")
    ctx.emit(payload, "\n".join(lines))


# -------------------------------------------------------------------- service

@cli.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@pass_context
def serve(ctx, host, port):
    """Run the HTTP API server."""
    import uvicorn

    from .service import create_app

    ctx.close()  # the server process owns the workspace lock
    app = create_app(ctx.settings)
    uvicorn.run(app, host=host or ctx.settings.host, port=port or ctx.settings.port,
                log_level="info")


@cli.command()
@pass_context
def openapi(ctx):
    """Print the OpenAPI description of the HTTP API."""
    from .service import create_app

    app = create_app(ctx.settings)
    click.echo(json.dumps(app.openapi(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
