"""HTTP service contract tests over the in-process client."""
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from groundctl.api import ServiceConfig, create_app
from groundctl.executor import default_fixture_dir


def fixture_documents() -> list[dict]:
    fd = default_fixture_dir()
    docs = []
    for name in ("home.html", "product.html", "cart.html", "checkout.html", "prd.md"):
        docs.append(
            {
                "name": name,
                "type": name.rsplit(".", 1)[1],
                "content": (fd / name).read_text(encoding="utf-8"),
            }
        )
    return docs


@pytest.fixture()
def client():
    app = create_app(ServiceConfig())
    with TestClient(app) as c:
        yield c


@pytest.fixture()
def loaded_client(client):
    resp = client.post("/ingest", json={"documents": fixture_documents()})
    assert resp.status_code == 200
    return client


class TestIngest:
    def test_fixture_corpus_indexed(self, client):
        resp = client.post("/ingest", json={"documents": fixture_documents()})
        assert resp.status_code == 200
        body = resp.json()
        assert body["chunks_indexed"] > 0
        stats = client.get("/stats").json()
        assert stats["chunks"] == body["chunks_indexed"]
        assert set(stats["by_type"]) == {"html", "markdown"}
        assert len(stats["sources"]) == 5

    def test_empty_body_422(self, client):
        assert client.post("/ingest", json={}).status_code == 422
        assert client.post("/ingest", json={"documents": []}).status_code == 422

    def test_duplicate_name_400(self, client):
        doc = {"name": "a.md", "type": "md", "content": "# hi"}
        resp = client.post("/ingest", json={"documents": [doc, doc]})
        assert resp.status_code == 400
        assert "a" in resp.json()["message"]

    def test_duplicate_across_requests_400(self, loaded_client):
        resp = loaded_client.post(
            "/ingest",
            json={"documents": [{"name": "prd.md", "type": "md", "content": "x"}]},
        )
        assert resp.status_code == 400
        assert "prd" in resp.json()["message"]

    def test_unsupported_type_400(self, client):
        resp = client.post(
            "/ingest",
            json={"documents": [{"name": "a.docx", "type": "docx", "content": "x"}]},
        )
        assert resp.status_code == 400
        assert resp.json()["code"] == "unsupported_type"

    def test_malformed_json_document_422(self, client):
        resp = client.post(
            "/ingest",
            json={"documents": [{"name": "b.json", "type": "json", "content": "{oops"}]},
        )
        assert resp.status_code == 422

    def test_collision_reported(self, client):
        html = '<div id="dup">a</div><span id="dup">b</span>'
        resp = client.post(
            "/ingest",
            json={"documents": [{"name": "c.html", "type": "html", "content": html}]},
        )
        assert resp.status_code == 200
        assert resp.json()["collisions"] == [{"source": "c", "id": "dup", "count": 2}]

    def test_multipart_upload(self, client):
        files = [
            ("files", ("notes.md", b"# Notes\n\nsome text", "text/markdown")),
        ]
        resp = client.post("/ingest-files", files=files)
        assert resp.status_code == 200
        assert resp.json()["chunks_indexed"] == 1

    def test_error_envelope_shape(self, client):
        resp = client.post(
            "/ingest",
            json={"documents": [{"name": "a.docx", "type": "docx", "content": "x"}]},
        )
        body = resp.json()
        assert set(body) == {"code", "message", "detail"}


class TestGenerateTestCases:
    def test_empty_store_409(self, client):
        resp = client.post("/generate-test-cases", json={"query": "anything"})
        assert resp.status_code == 409
        assert resp.json()["code"] == "empty_knowledge_base"

    def test_steps_and_retrieval_summary(self, loaded_client):
        resp = loaded_client.post(
            "/generate-test-cases", json={"query": "Add headphones to cart"}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["steps"]) >= 3
        assert "Navigate" in body["steps"][0]
        assert body["steps"][0].startswith("1.")
        assert len(body["retrieved"]) >= 3
        assert {"chunk_id", "score", "rank", "source_type"} <= set(body["retrieved"][0])


class TestGenerateScript:
    def test_grounded_preview_resolves(self, loaded_client):
        resp = loaded_client.post(
            "/generate-script", json={"query": "Add headphones to cart"}
        )
        body = resp.json()
        assert "#add-headphones" in body["script"]
        assert body["grounding"]["rate"] == 1.0
        assert all(s["outcome"] == "resolved" for s in body["grounding"]["steps"])

    def test_ungrounded_preview_flags_hallucination(self, loaded_client):
        resp = loaded_client.post(
            "/generate-script",
            json={"query": "Add headphones to cart", "generator": "ungrounded"},
        )
        body = resp.json()
        assert "#add-to-cart" in body["script"]
        flagged = [s for s in body["grounding"]["steps"] if s["outcome"] == "not_found"]
        assert flagged
        assert any(s["locator"] == "#add-to-cart" for s in flagged)

    def test_preview_matches_resolution_stats(self, loaded_client, fixture_bundle):
        from groundctl.executor import resolution_stats
        from groundctl.gen import parse_script

        resp = loaded_client.post(
            "/generate-script", json={"query": "Complete checkout with payment"}
        )
        body = resp.json()
        stats = resolution_stats(
            parse_script(body["script"]), fixture_bundle.index, fixture_bundle.manifest
        )
        assert body["grounding"]["resolved"] == stats.resolved
        assert body["grounding"]["total"] == stats.total
        assert body["grounding"]["rate"] == stats.rate

    def test_unknown_generator_400(self, loaded_client):
        resp = loaded_client.post(
            "/generate-script", json={"query": "x", "generator": "nope"}
        )
        assert resp.status_code == 400

    def test_deterministic_response(self, loaded_client):
        payload = {"query": "Cancel order"}
        a = loaded_client.post("/generate-script", json=payload).content
        b = loaded_client.post("/generate-script", json=payload).content
        assert a == b


class TestExecute:
    def test_scenario_goal_met(self, loaded_client):
        resp = loaded_client.post(
            "/execute",
            json={"script": "navigate home\nclick #add-headphones", "scenario_id": 1},
        )
        body = resp.json()
        assert body["goal_met"] is True
        assert body["execution_success"] is True

    def test_syntax_error_400_with_line(self, client):
        resp = client.post("/execute", json={"script": "clik #x"})
        assert resp.status_code == 400
        body = resp.json()
        assert body["detail"]["line"] == 1
        assert "clik" in body["detail"]["reason"]

    def test_trace_steps_reported(self, loaded_client):
        resp = loaded_client.post(
            "/execute", json={"script": "navigate checkout\nclick .btn-submit"}
        )
        steps = resp.json()["steps"]
        assert steps[-1]["outcome"] == "ambiguous"


class TestEvaluate:
    def test_job_lifecycle_cardinality(self, loaded_client):
        resp = loaded_client.post(
            "/evaluate", json={"arms": ["grounded", "ungrounded"], "seeds": [42, 123, 456]}
        )
        assert resp.status_code == 200
        job_id = resp.json()["job_id"]
        body = None
        for _ in range(200):
            body = loaded_client.get(f"/evaluate/{job_id}").json()
            if body["status"] in ("done", "failed"):
                break
            time.sleep(0.05)
        assert body["status"] == "done", body.get("error")
        assert len(body["records"]) == 120  # 2 arms x 3 seeds x 20 scenarios
        assert body["report"]["metrics"]["element_resolution"]["mock_grounded"]["mean"] == 100.0

    def test_unknown_job_404(self, client):
        assert client.get("/evaluate/deadbeef").status_code == 404

    def test_empty_store_409(self, client):
        resp = client.post("/evaluate", json={"arms": ["grounded"]})
        assert resp.status_code == 409


def test_openapi_schema_lists_endpoints():
    app = create_app(ServiceConfig())
    schema = app.openapi()
    for path in ("/ingest", "/generate-test-cases", "/generate-script", "/execute", "/evaluate"):
        assert path in schema["paths"]


def test_webui_static_mount(tmp_path):
    (tmp_path / "index.html").write_text("<html><body>ui</body></html>")
    app = create_app(ServiceConfig(webui_dir=tmp_path))
    with TestClient(app) as c:
        resp = c.get("/")
        assert resp.status_code == 200
        assert "ui" in resp.text
