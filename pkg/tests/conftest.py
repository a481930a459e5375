from __future__ import annotations

from pathlib import Path

import pytest

from parascope.config import Settings
from parascope.query import StubLLMProvider
from parascope.embedding import HashEmbeddingProvider
from parascope.store import Workspace
from parascope.workbench import Workbench

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of a run."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in rep.nodeid and rep.when == "call":
                status = "PASS" if rep.passed else "FAIL"
                lines.append(f"[{status}] {rep.nodeid.split('::')[-1]}")
    if lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def small_tei() -> bytes:
    return (FIXTURES / "fixture_small.tei.xml").read_bytes()


@pytest.fixture
def rich_tei() -> bytes:
    return (FIXTURES / "fixture_rich.tei.xml").read_bytes()


@pytest.fixture
def noheader_tei() -> bytes:
    return (FIXTURES / "fixture_noheader.tei.xml").read_bytes()


def make_workbench(root: Path, llm: StubLLMProvider | None = None) -> Workbench:
    settings = Settings(workspace=str(root))
    return Workbench(
        Workspace(root),
        HashEmbeddingProvider(),
        llm or StubLLMProvider(),
        settings,
    )


@pytest.fixture
def workbench(tmp_path):
    wb = make_workbench(tmp_path / "ws")
    yield wb
    wb.close()


@pytest.fixture
def seeded_workbench(tmp_path, small_tei, rich_tei):
    """Workbench with a library holding both TEI fixtures."""
    wb = make_workbench(tmp_path / "ws")
    library = wb.create_library("validation")
    paper_small, _ = wb.ingest_tei(library.id, small_tei)
    paper_rich, _ = wb.ingest_tei(library.id, rich_tei)
    wb.library = library
    wb.paper_small = paper_small
    wb.paper_rich = paper_rich
    yield wb
    wb.close()
