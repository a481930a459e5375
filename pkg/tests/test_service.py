from __future__ import annotations

import json
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from parascope.config import Settings
from parascope.service import create_app
from parascope.store import Scope

from conftest import make_workbench


@pytest.fixture
def client(tmp_path):
    wb = make_workbench(tmp_path / "ws")
    app = create_app(Settings(workspace=str(tmp_path / "ws")), workbench=wb)
    with TestClient(app) as c:
        c.workbench = wb
        yield c
    wb.close()


def make_library(client, name="lib") -> str:
    resp = client.post("/libraries", json={"name": name})
    assert resp.status_code == 201
    return resp.json()["id"]


def upload_tei(client, library_id: str, tei: bytes) -> dict:
    resp = client.post(
        f"/libraries/{library_id}/papers",
        json={"format": "tei", "content": tei.decode("utf-8")},
    )
    assert resp.status_code == 201, resp.text
    return resp.json()


def upload_text(client, library_id: str, title: str, text: str) -> dict:
    resp = client.post(
        f"/libraries/{library_id}/papers",
        json={"format": "text", "title": title, "text": text},
    )
    assert resp.status_code == 201, resp.text
    return resp.json()


class TestLibrariesAndPapers:
    def test_create_and_list(self, client):
        lid = make_library(client, "validation")
        listing = client.get("/libraries").json()
        assert [l["id"] for l in listing] == [lid]
        assert listing[0]["paper_count"] == 0

    def test_upload_grows_listing_by_one(self, client, small_tei):
        lid = make_library(client)
        before = len(client.get(f"/libraries/{lid}/papers").json())
        upload_tei(client, lid, small_tei)
        after = client.get(f"/libraries/{lid}/papers").json()
        assert len(after) == before + 1
        assert after[0]["paragraph_count"] == 5

    def test_upload_deduplicated_by_content(self, client, small_tei):
        lid = make_library(client)
        first = upload_tei(client, lid, small_tei)
        second = upload_tei(client, lid, small_tei)
        assert first["created"] is True
        assert second["created"] is False
        assert first["paper"]["id"] == second["paper"]["id"]
        assert len(client.get(f"/libraries/{lid}/papers").json()) == 1

    def test_get_paper_full_structure(self, client, small_tei):
        lid = make_library(client)
        paper_id = upload_tei(client, lid, small_tei)["paper"]["id"]
        paper = client.get(f"/papers/{paper_id}").json()
        assert [len(s["paragraphs"]) for s in paper["sections"]] == [3, 2]
        assert paper["metadata"]["authors"] == ["Maria Keller", "Jonas Brandt"]

    def test_unknown_paper_is_404_envelope(self, client):
        resp = client.get("/papers/doesnotexist")
        assert resp.status_code == 404
        assert resp.json()["error"]["code"] == "not_found"

    def test_malformed_tei_error_envelope(self, client):
        lid = make_library(client)
        resp = client.post(
            f"/libraries/{lid}/papers",
            json={"format": "tei", "content": "<TEI><open"},
        )
        assert resp.status_code == 422
        assert resp.json()["error"]["code"] == "malformed_xml"

    def test_paragraph_correction(self, client):
        lid = make_library(client)
        paper = upload_text(client, lid, "t", "teh laser\n\nsecond")["paper"]
        pid = paper["sections"][0]["paragraphs"][0]["id"]
        resp = client.patch(f"/paragraphs/{pid}", json={"text": "the laser"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["text"] == "the laser"
        assert body["edited"] is True
        assert body["id"] != pid


class TestSearch:
    def test_text_mode_spans(self, client):
        lid = make_library(client)
        paper = upload_text(client, lid, "t",
                            "a force sensor and a backup sensor\n\nno match here")["paper"]
        resp = client.get(f"/papers/{paper['id']}/search",
                          params={"q": "sensor", "mode": "text"})
        hits = resp.json()["hits"]
        assert len(hits) == 1
        assert len(hits[0]["spans"]) == 2

    def test_semantic_mode_sorted_desc(self, client):
        lid = make_library(client)
        paper = upload_text(client, lid, "t",
                            "thermistor sensor data\n\nspreadsheet of budgets\n\n"
                            "sensor calibration notes")["paper"]
        resp = client.get(f"/papers/{paper['id']}/search",
                          params={"q": "sensor", "mode": "semantic", "k": 3})
        hits = resp.json()["hits"]
        scores = [h["score"] for h in hits]
        assert scores == sorted(scores, reverse=True)
        assert [h["rank"] for h in hits] == [1, 2, 3]

    def test_library_scope_search(self, client):
        lid = make_library(client)
        upload_text(client, lid, "a", "one sensor here")
        upload_text(client, lid, "b", "two sensors there")
        resp = client.get(f"/libraries/{lid}/search", params={"q": "sensor"})
        assert len(resp.json()["hits"]) == 2


class TestRetrievals:
    def _setup(self, client):
        lid = make_library(client)
        upload_text(client, lid, "a",
                    "dataset of labeled images\n\nmodel training with adamlike updates\n\n"
                    "sensor readings from a thermistor\n\nsteel printer hardware")
        return lid

    def test_create_with_default_shaped_body(self, client):
        self._setup(client)
        resp = client.post("/retrievals", json={
            "name": "Dataset Relevant",
            "description": "finds dataset paragraphs",
            "positive_queries": ["Are dataset statistics provided?"],
            "negative_queries": ["related work"],
        })
        assert resp.status_code == 201
        body = resp.json()
        assert body["weights"] == {"a": 1.0, "b": 1.0, "c": 1.0, "d": 1.0}
        assert body["positive_queries"] == ["Are dataset statistics provided?"]

    def test_import_defaults_endpoint(self, client):
        resp = client.post("/retrievals/import-defaults")
        assert resp.status_code == 200
        assert len(resp.json()) == 4

    def test_rank_matches_workbench_module(self, client):
        lid = self._setup(client)
        spec = client.post("/retrievals", json={
            "name": "r", "positive_queries": ["sensor thermistor readings"],
        }).json()
        api_hits = client.get(f"/retrievals/{spec['id']}/rank",
                              params={"scope": f"library:{lid}", "k": 3}).json()
        module_hits = client.workbench.rank(spec["id"], Scope("library", lid), k=3)
        assert [h["paragraph_id"] for h in api_hits] == [h.paragraph_id for h in module_hits]
        assert [h["score"] for h in api_hits] == [pytest.approx(h.score) for h in module_hits]
        assert [h["display_score"] for h in api_hits] == [h.display_score for h in module_hits]

    def test_label_endpoint_updates_memberships(self, client):
        lid = self._setup(client)
        spec = client.post("/retrievals", json={
            "name": "r", "positive_queries": ["dataset"],
        }).json()
        hits = client.get(f"/retrievals/{spec['id']}/rank",
                          params={"scope": f"library:{lid}", "k": 1}).json()
        pid = hits[0]["paragraph_id"]
        updated = client.post(f"/retrievals/{spec['id']}/labels",
                              json={"paragraph_id": pid, "polarity": "negative"}).json()
        assert updated["negative_paragraph_ids"] == [pid]
        cleared = client.post(f"/retrievals/{spec['id']}/labels",
                              json={"paragraph_id": pid, "polarity": "clear"}).json()
        assert cleared["negative_paragraph_ids"] == []

    def test_embedding_endpoint_matches_module(self, client):
        self._setup(client)
        spec = client.post("/retrievals", json={
            "name": "r", "positive_queries": ["thermistor sensor"],
        }).json()
        body = client.get(f"/retrievals/{spec['id']}/embedding").json()
        module_vec = client.workbench.retrieval_embedding(spec["id"])
        assert body["dim"] == module_vec.dim
        assert body["provider_id"] == module_vec.provider_id
        import numpy as np
        assert np.allclose(body["values"], module_vec.values, atol=1e-7)
        assert body["norm"] == pytest.approx(float(np.linalg.norm(module_vec.values)),
                                             abs=1e-7)

    def test_degenerate_retrieval_error_code(self, client):
        lid = self._setup(client)
        spec = client.post("/retrievals", json={"name": "empty"}).json()
        resp = client.get(f"/retrievals/{spec['id']}/rank",
                          params={"scope": f"library:{lid}"})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "empty_retrieval"


class TestQueryEndpoint:
    def test_answer_with_passages(self, client):
        lid = make_library(client)
        paper = upload_text(client, lid, "t",
                            "the force sensor sat above the hot end\n\n"
                            "unrelated paragraph about scheduling")["paper"]
        resp = client.post("/query", json={
            "query": "what sensor was used",
            "source": "semantic",
            "scope": f"paper:{paper['id']}",
            "k": 2,
        })
        assert resp.status_code == 200
        body = resp.json()
        assert body["refused"] is False
        assert len(body["used_passages"]) == 2
        assert body["used_passages"][0]["index"] == 0

    def test_zero_passages_refuses(self, client):
        lid = make_library(client)
        paper = upload_text(client, lid, "t", "!!! ??? ...")["paper"]
        # the only paragraph has no tokens: degenerate vector, never ranked
        resp = client.post("/query", json={
            "query": "anything",
            "source": "semantic",
            "scope": f"paper:{paper['id']}",
        })
        body = resp.json()
        assert body["refused"] is True
        assert body["used_passages"] == []


class TestClassifierEndpoints:
    def _label_everything(self, client, lid):
        papers = client.get(f"/libraries/{lid}/papers").json()
        categories = ["data", "model", "sensing", "system"]
        count = 0
        for summary in papers:
            paper = client.get(f"/papers/{summary['id']}").json()
            for section in paper["sections"]:
                for para in section["paragraphs"]:
                    cat = categories[count % 4]
                    client.put(f"/paragraphs/{para['id']}/labels",
                               json={"categories": [cat]})
                    count += 1

    def test_export_train_report_predict(self, client):
        lid = make_library(client)
        for i in range(3):
            upload_text(client, lid, f"p{i}",
                        "\n\n".join(f"paragraph {i}-{j} about topic {j}" for j in range(4)))
        self._label_everything(client, lid)

        export = client.get("/datasets/export", params={"library": lid, "seed": 1})
        assert export.status_code == 200
        lines = [l for l in export.text.splitlines() if l]
        assert len(lines) == 12
        assert {"paragraph_id", "text", "labels", "embedding"} <= set(json.loads(lines[0]))

        job = client.post("/classifier/train",
                          json={"library": lid, "seed": 1, "epochs": 100}).json()
        assert job["status"] in ("pending", "running", "done")
        deadline = time.time() + 30
        while job["status"] not in ("done", "error") and time.time() < deadline:
            time.sleep(0.05)
            job = client.get(f"/jobs/{job['id']}").json()
        assert job["status"] == "done", job
        assert job["result"]["n_train"] + job["result"]["n_test"] == 12

        report = client.get("/classifier/report")
        assert report.status_code == 200
        body = report.json()
        assert set(body["averages"]) == {"micro", "macro", "weighted", "samples"}
        assert set(body["classes"]) == {"data", "sensing", "model", "system"}
        assert "precision" in body["text"]

        paper = client.get(f"/papers/{client.get(f'/libraries/{lid}/papers').json()[0]['id']}").json()
        pid = paper["sections"][0]["paragraphs"][0]["id"]
        pred = client.post("/classifier/predict", json={"paragraph_id": pid}).json()
        assert set(pred["probabilities"]) == {"data", "sensing", "model", "system"}

    def test_unknown_job(self, client):
        resp = client.get("/jobs/nope")
        assert resp.status_code == 404


class TestAuth:
    def test_token_enforced_when_configured(self, tmp_path, monkeypatch, small_tei):
        monkeypatch.setenv("PARASCOPE_API_TOKEN", "sekret")
        wb = make_workbench(tmp_path / "ws")
        app = create_app(Settings(workspace=str(tmp_path / "ws")), workbench=wb)
        with TestClient(app) as c:
            denied = c.get("/libraries")
            assert denied.status_code == 401
            assert denied.json()["error"]["code"] == "unauthorized"
            allowed = c.get("/libraries", headers={"Authorization": "Bearer sekret"})
            assert allowed.status_code == 200
            assert c.get("/health").status_code == 200  # health stays open
        wb.close()


class TestOpenApi:
    def test_committed_description_matches_app(self, client):
        committed = json.loads(
            (Path(__file__).parent.parent / "docs" / "openapi.json").read_text()
        )
        current = client.app.openapi()
        assert set(committed["paths"]) == set(current["paths"])
        for path, ops in current["paths"].items():
            assert set(committed["paths"][path]) == set(ops)
