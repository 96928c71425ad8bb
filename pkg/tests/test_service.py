import json

import pytest
from fastapi.testclient import TestClient

from iutkit.mock_backend import CAT_MAT_INSTRUCTION, solid_png
from iutkit.service import create_app


@pytest.fixture
def client(runtime, tmp_path):
    app = create_app(runtime, sessions_root=tmp_path / "sessions", runs_root=tmp_path / "runs")
    with TestClient(app) as client:
        client.runtime = runtime
        client.runs_root = tmp_path / "runs"
        yield client


def create_cat_mat_session(client) -> str:
    client.runtime["extractor"].seed_image("cat-mat-photo")
    resp = client.post("/sessions", json={"image_id": "cat-mat-photo"})
    assert resp.status_code == 200
    return resp.json()["session_id"]


class TestSessions:
    def test_create_from_image_id(self, client):
        client.runtime["extractor"].seed_image("cat-mat-photo")
        resp = client.post("/sessions", json={"image_id": "cat-mat-photo"})
        body = resp.json()
        assert resp.status_code == 200
        assert body["turn"]["turn_id"] == 0
        assert '"cat"' in body["turn"]["state_after"]["tree"]

    def test_create_from_b64(self, client):
        import base64

        payload = base64.b64encode(solid_png((1, 2, 3))).decode()
        resp = client.post("/sessions", json={"image_b64": payload})
        assert resp.status_code == 200

    def test_create_unknown_image(self, client):
        assert client.post("/sessions", json={"image_id": "ghost"}).status_code == 404

    def test_create_requires_an_image(self, client):
        assert client.post("/sessions", json={}).status_code == 422

    def test_turn_includes_edit_script_and_triplet(self, client):
        session_id = create_cat_mat_session(client)
        resp = client.post(f"/sessions/{session_id}/turns", json={"instruction": CAT_MAT_INSTRUCTION})
        turn = resp.json()
        assert resp.status_code == 200
        assert turn["status"] == "ok"
        assert "SET cat.state = sleeping" in turn["edits"]
        assert turn["triplet"]["entity"] == pytest.approx(0.8808, abs=1e-4)
        assert turn["generated_image_ids"]

    def test_turn_skip_evaluation(self, client):
        session_id = create_cat_mat_session(client)
        resp = client.post(
            f"/sessions/{session_id}/turns",
            json={"instruction": CAT_MAT_INSTRUCTION, "evaluate": False},
        )
        assert resp.json()["triplet"] is None

    def test_turn_on_missing_session(self, client):
        assert client.post("/sessions/nope/turns", json={"instruction": "x"}).status_code == 404

    def test_list_and_fetch_log(self, client):
        session_id = create_cat_mat_session(client)
        client.post(f"/sessions/{session_id}/turns", json={"instruction": CAT_MAT_INSTRUCTION})
        listing = client.get("/sessions").json()
        assert {"session_id": session_id, "turns": 2} in listing
        log = client.get(f"/sessions/{session_id}").json()
        assert log["iut_mode"] == "on"
        assert len(log["turns"]) == 2

    def test_state_endpoint_is_canonical_json(self, client):
        session_id = create_cat_mat_session(client)
        client.post(f"/sessions/{session_id}/turns", json={"instruction": CAT_MAT_INSTRUCTION})
        resp = client.get(f"/sessions/{session_id}/state")
        assert resp.status_code == 200
        tree = json.loads(resp.text)
        cat = next(o for o in tree["objects"] if o["name"] == "cat")
        assert cat["state"] == "sleeping"


class TestArtifactsAndReports:
    def test_image_roundtrip(self, client):
        session_id = create_cat_mat_session(client)
        turn = client.post(f"/sessions/{session_id}/turns", json={"instruction": CAT_MAT_INSTRUCTION}).json()
        image_id = turn["generated_image_ids"][0]
        resp = client.get(f"/images/{image_id}")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert resp.content.startswith(b"\x89PNG")

    def test_image_missing(self, client):
        assert client.get("/images/ghost").status_code == 404

    def test_run_report(self, client):
        run_dir = client.runs_root / "r1"
        run_dir.mkdir(parents=True)
        (run_dir / "report.txt").write_text("VLM ... 46.7(↑9.0)", "utf-8")
        resp = client.get("/runs/r1/report")
        assert resp.status_code == 200
        assert "46.7(↑9.0)" in resp.text
        assert client.get("/runs/r2/report").status_code == 404
