"""HTTP service contract: sessions, ingest, chat, feedback, errors, locking."""
from __future__ import annotations

import base64
import json
import re
import sys
import threading
import time

import pytest
from fastapi.testclient import TestClient

from menulens.llmclient import LlmClientConfig
from menulens.menu import build_menu, menu_to_obj
from menulens.service import FifoLock, create_app

from conftest import FIXTURES, completion_body, layout_doc, ocr_doc_obj

SESSION_ID_RE = re.compile(r"^[A-Za-z0-9_-]{22}$")
KEYFRAMES = {"menu_en": 17, "menu_it": 12, "menu_pl": 21, "menu_el": 9}


@pytest.fixture
def client():
    app = create_app(profiles_dir=str(FIXTURES / "profiles"))
    with TestClient(app) as c:
        yield c


def ingest_payload(menu_id: str) -> dict:
    scenario = FIXTURES / "scenarios" / menu_id
    detections = json.loads((scenario / "detections.json").read_text("utf-8"))
    ocr_documents = {}
    for path in (scenario / "ocr").glob("frame_*.ocr.json"):
        frame = path.name.split("_")[1].split(".")[0]
        ocr_documents[frame] = json.loads(path.read_text("utf-8"))
    return {
        "detections": detections["detections"],
        "dims": detections["dims"],
        "ocr_documents": ocr_documents,
    }


def make_session(client, profile: str | None = None) -> str:
    body = {"preferences_profile": profile} if profile else None
    response = client.post("/v1/sessions", json=body)
    assert response.status_code == 201
    return response.json()["session_id"]


def mini_payload(*texts: str) -> dict:
    return {
        "detections": [
            {"frame_index": 0, "label": "menu", "confidence": 0.9, "bbox": [600, 600, 800, 800]}
        ],
        "dims": {"width": 1408, "height": 1408},
        "ocr_documents": {"0": ocr_doc_obj(*texts)},
    }


def assert_error_body(response, status: int, code: str):
    assert response.status_code == status
    body = response.json()
    assert set(body) == {"code", "message"}
    assert body["code"] == code
    assert re.fullmatch(r"[A-Z_]+", body["code"])
    assert isinstance(body["message"], str) and body["message"]


class TestHealthAndSessions:
    def test_healthz(self, client):
        response = client.get("/healthz")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}

    def test_create_session_returns_random_id(self, client):
        first = client.post("/v1/sessions")
        second = client.post("/v1/sessions", json={})
        assert first.status_code == second.status_code == 201
        ids = {first.json()["session_id"], second.json()["session_id"]}
        assert len(ids) == 2
        for sid in ids:
            assert SESSION_ID_RE.match(sid)

    def test_create_with_known_profile(self, client):
        assert make_session(client, "alex")

    def test_unknown_profile_404(self, client):
        response = client.post("/v1/sessions", json={"preferences_profile": "nobody"})
        assert_error_body(response, 404, "PROFILE_NOT_FOUND")

    def test_profile_requested_without_profiles_dir(self):
        with TestClient(create_app()) as bare:
            response = bare.post("/v1/sessions", json={"preferences_profile": "alex"})
            assert_error_body(response, 404, "PROFILE_NOT_FOUND")


class TestIngest:
    @pytest.mark.parametrize("menu_id", sorted(KEYFRAMES))
    def test_fixture_scenarios_parse_to_golden_menus(self, client, menu_id):
        sid = make_session(client)
        response = client.post(f"/v1/sessions/{sid}/ingest", json=ingest_payload(menu_id))
        assert response.status_code == 200
        body = response.json()
        golden = json.loads((FIXTURES / "golden" / f"{menu_id}.parsed.json").read_text("utf-8"))
        assert body["provenance"]["keyframe_index"] == KEYFRAMES[menu_id]
        assert body["provenance"]["parser"] == "grammar"
        assert body["schema_version"] == 1
        assert body["language_hint"] == golden["language_hint"]
        assert [s["title"] for s in body["sections"]] == [s["title"] for s in golden["sections"]]
        got_items = [
            {"name": i["name"], "description": i["description"], "price": i["price"]}
            for s in body["sections"]
            for i in s["items"]
        ]
        want_items = [i for s in golden["sections"] for i in s["items"]]
        assert got_items == want_items

    def test_unknown_session_404(self, client):
        response = client.post("/v1/sessions/ghost/ingest", json=ingest_payload("menu_en"))
        assert_error_body(response, 404, "SESSION_NOT_FOUND")

    def test_low_confidence_detections_yield_no_menu(self, client):
        sid = make_session(client)
        payload = mini_payload("Soup 5.00")
        for det in payload["detections"]:
            det["confidence"] = 0.2
        response = client.post(f"/v1/sessions/{sid}/ingest", json=payload)
        assert_error_body(response, 422, "NO_MENU_DETECTED")

    def test_empty_menu_fires_422(self, client):
        sid = make_session(client)
        response = client.post(f"/v1/sessions/{sid}/ingest", json=mini_payload("STARTERS"))
        assert_error_body(response, 422, "EMPTY_MENU")

    def test_missing_ocr_document_for_keyframe(self, client):
        sid = make_session(client)
        payload = mini_payload("Soup 5.00")
        payload["ocr_documents"] = {}
        response = client.post(f"/v1/sessions/{sid}/ingest", json=payload)
        assert_error_body(response, 422, "OCR_DOCUMENT_MISSING")

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda p: p.pop("detections"),
            lambda p: p.update(detections={"not": "a list"}),
            lambda p: p.pop("dims"),
            lambda p: p.update(dims={"width": 0, "height": 10}),
            lambda p: p.pop("ocr_documents"),
        ],
    )
    def test_malformed_bodies_400(self, client, mutate):
        sid = make_session(client)
        payload = mini_payload("Soup 5.00")
        mutate(payload)
        response = client.post(f"/v1/sessions/{sid}/ingest", json=payload)
        assert response.status_code == 400
        assert set(response.json()) == {"code", "message"}

    def test_non_object_body_400(self, client):
        sid = make_session(client)
        response = client.post(
            f"/v1/sessions/{sid}/ingest", content=b'"text"',
            headers={"Content-Type": "application/json"},
        )
        assert response.status_code == 400
        assert response.json()["code"] == "BAD_REQUEST"

    def test_bad_token_confidence_maps_to_schema_error(self, client):
        sid = make_session(client)
        payload = mini_payload("Soup 5.00")
        payload["ocr_documents"]["0"]["tokens"][0]["confidence"] = 3.5
        response = client.post(f"/v1/sessions/{sid}/ingest", json=payload)
        assert_error_body(response, 400, "SCHEMA_ERROR")

    def test_reingest_clears_rejections(self, client):
        sid = make_session(client)
        client.post(f"/v1/sessions/{sid}/ingest", json=mini_payload("A 1.00", "B 2.00"))
        client.post(f"/v1/sessions/{sid}/feedback", json={"rejected_item_ids": ["0.0"]})
        client.post(f"/v1/sessions/{sid}/ingest", json=mini_payload("A 1.00", "B 2.00"))
        chat = client.post(f"/v1/sessions/{sid}/chat", json={"query": "anything"})
        assert chat.json()["ranked"][0]["item_id"] == "0.0"


class TestChat:
    def test_offline_fixture_chat_golden(self, client):
        sid = make_session(client, "alex")
        client.post(f"/v1/sessions/{sid}/ingest", json=ingest_payload("menu_en"))
        response = client.post(
            f"/v1/sessions/{sid}/chat",
            json={"query": "What do you recommend from the menu?"},
        )
        assert response.status_code == 200
        body = response.json()
        assert [r["item_id"] for r in body["ranked"]] == ["1.0", "0.1", "2.1"]
        assert [r["name"] for r in body["ranked"]] == [
            "Grilled Octopus",
            "Garlic Bread",
            "Lemon Sorbet",
        ]
        assert body["ranked"][0]["score"] == 2
        assert body["ranked"][0]["rationale"] == ["grilled", "octopus"]
        assert body["degraded"] is True
        assert body["text"].startswith("Suggestions from the menu:")
        assert isinstance(body["evidence"], list) and body["evidence"]

    def test_chat_before_ingest_409(self, client):
        sid = make_session(client)
        response = client.post(f"/v1/sessions/{sid}/chat", json={"query": "hi"})
        assert_error_body(response, 409, "NO_MENU_INGESTED")

    @pytest.mark.parametrize(
        "payload",
        [{}, {"query": ""}, {"query": "  "}, {"query": 7}, {"query": "ok", "k": 0}, {"query": "ok", "k": "three"}],
    )
    def test_invalid_chat_payloads_400(self, client, payload):
        sid = make_session(client)
        client.post(f"/v1/sessions/{sid}/ingest", json=mini_payload("Soup 5.00"))
        response = client.post(f"/v1/sessions/{sid}/chat", json=payload)
        assert_error_body(response, 400, "BAD_REQUEST")

    def test_allergens_can_exclude_whole_menu(self, client):
        sid = make_session(client, "seafood_allergy")
        client.post(
            f"/v1/sessions/{sid}/ingest",
            json=mini_payload("Shrimp Saganaki 12.00", "Grilled Fish 10.00"),
        )
        response = client.post(f"/v1/sessions/{sid}/chat", json={"query": "dinner"})
        assert_error_body(response, 422, "NO_ELIGIBLE_ITEMS")

    def test_k_limits_ranked_length(self, client):
        sid = make_session(client)
        client.post(f"/v1/sessions/{sid}/ingest", json=ingest_payload("menu_en"))
        response = client.post(f"/v1/sessions/{sid}/chat", json={"query": "food", "k": 2})
        assert len(response.json()["ranked"]) == 2


class TestFeedback:
    def test_rejecting_top_promotes_next(self, client):
        sid = make_session(client)
        client.post(f"/v1/sessions/{sid}/ingest", json=mini_payload("A 1.00", "B 2.00", "C 3.00"))
        first = client.post(f"/v1/sessions/{sid}/chat", json={"query": "q"}).json()
        assert first["ranked"][0]["item_id"] == "0.0"
        response = client.post(
            f"/v1/sessions/{sid}/feedback", json={"rejected_item_ids": ["0.0"]}
        )
        assert response.status_code == 200
        assert response.json()["ranked"][0]["item_id"] == "0.1"

    def test_unknown_item_id_400(self, client):
        sid = make_session(client)
        client.post(f"/v1/sessions/{sid}/ingest", json=mini_payload("A 1.00"))
        response = client.post(
            f"/v1/sessions/{sid}/feedback", json={"rejected_item_ids": ["9.9"]}
        )
        assert_error_body(response, 400, "INVALID_ITEM_ID")

    def test_rejecting_everything_422(self, client):
        sid = make_session(client)
        client.post(f"/v1/sessions/{sid}/ingest", json=mini_payload("A 1.00"))
        response = client.post(
            f"/v1/sessions/{sid}/feedback", json={"rejected_item_ids": ["0.0"]}
        )
        assert_error_body(response, 422, "NO_ELIGIBLE_ITEMS")

    def test_feedback_before_ingest_409(self, client):
        sid = make_session(client)
        response = client.post(f"/v1/sessions/{sid}/feedback", json={"rejected_item_ids": []})
        assert_error_body(response, 409, "NO_MENU_INGESTED")

    def test_non_list_ids_400(self, client):
        sid = make_session(client)
        client.post(f"/v1/sessions/{sid}/ingest", json=mini_payload("A 1.00"))
        response = client.post(f"/v1/sessions/{sid}/feedback", json={"rejected_item_ids": "0.0"})
        assert_error_body(response, 400, "BAD_REQUEST")


class TestMenuEndpoint:
    def test_menu_equals_ingest_response(self, client):
        sid = make_session(client)
        ingest = client.post(f"/v1/sessions/{sid}/ingest", json=ingest_payload("menu_el"))
        menu = client.get(f"/v1/sessions/{sid}/menu")
        assert menu.status_code == 200
        assert menu.json() == ingest.json()

    def test_get_does_not_mutate(self, client):
        sid = make_session(client)
        client.post(f"/v1/sessions/{sid}/ingest", json=mini_payload("A 1.00"))
        assert (
            client.get(f"/v1/sessions/{sid}/menu").json()
            == client.get(f"/v1/sessions/{sid}/menu").json()
        )

    def test_menu_before_ingest_404(self, client):
        sid = make_session(client)
        assert_error_body(client.get(f"/v1/sessions/{sid}/menu"), 404, "NO_MENU_INGESTED")

    def test_unknown_session_404(self, client):
        assert_error_body(client.get("/v1/sessions/ghost/menu"), 404, "SESSION_NOT_FOUND")

    def test_unknown_route_keeps_error_shape(self, client):
        assert_error_body(client.get("/v1/nowhere"), 404, "NOT_FOUND")


class TestCapacity:
    def test_oldest_idle_session_evicted(self):
        with TestClient(create_app(capacity=2)) as client:
            first = make_session(client)
            second = make_session(client)
            client.post(f"/v1/sessions/{second}/ingest", json=mini_payload("A 1.00"))
            third = make_session(client)
            # first was the oldest idle entry, so it is gone
            assert client.get(f"/v1/sessions/{first}/menu").status_code == 404
            assert client.get(f"/v1/sessions/{second}/menu").status_code == 200
            assert client.get(f"/v1/sessions/{third}/menu").status_code == 404  # alive, no menu
            assert client.get(f"/v1/sessions/{third}/menu").json()["code"] == "NO_MENU_INGESTED"

    def test_all_sessions_busy_507(self):
        app = create_app(capacity=2)
        with TestClient(app) as client:
            sids = [make_session(client), make_session(client)]
            entries = [app.state.store.get(sid) for sid in sids]
            for entry in entries:
                entry.lock.acquire()
            try:
                response = client.post("/v1/sessions")
                assert_error_body(response, 507, "SESSION_CAPACITY")
            finally:
                for entry in entries:
                    entry.lock.release()
            assert client.post("/v1/sessions").status_code == 201


class TestSessionIsolation:
    def test_interleaved_equals_serial_transcripts(self):
        queries = ["What do you recommend from the menu?", "something sweet", "light starter"]

        def run(mode: str):
            with TestClient(create_app(profiles_dir=str(FIXTURES / "profiles"))) as client:
                a = make_session(client, "alex")
                b = make_session(client)
                client.post(f"/v1/sessions/{a}/ingest", json=ingest_payload("menu_en"))
                client.post(f"/v1/sessions/{b}/ingest", json=ingest_payload("menu_el"))
                out: dict[str, list] = {"a": [], "b": []}
                if mode == "serial":
                    for q in queries:
                        out["a"].append(client.post(f"/v1/sessions/{a}/chat", json={"query": q}).json())
                    for q in queries:
                        out["b"].append(client.post(f"/v1/sessions/{b}/chat", json={"query": q}).json())
                else:
                    for q in queries:
                        out["a"].append(client.post(f"/v1/sessions/{a}/chat", json={"query": q}).json())
                        out["b"].append(client.post(f"/v1/sessions/{b}/chat", json={"query": q}).json())
                return out

        assert run("serial") == run("interleaved")

    def test_parallel_chats_on_one_session_all_serialize(self):
        with TestClient(create_app()) as client:
            sid = make_session(client)
            client.post(f"/v1/sessions/{sid}/ingest", json=mini_payload("A 1.00", "B 2.00"))
            results = []

            def worker():
                response = client.post(f"/v1/sessions/{sid}/chat", json={"query": "q"})
                results.append(response.status_code)

            threads = [threading.Thread(target=worker) for _ in range(8)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert results == [200] * 8
            entry = client.app.state.store.get(sid)
            # every turn was recorded: 8 user + 8 assistant entries
            assert len(entry.session.history) == 16


class TestFifoLock:
    def test_waiters_acquire_in_arrival_order(self):
        lock = FifoLock()
        order: list[int] = []
        lock.acquire()
        threads = []

        def contender(i: int):
            lock.acquire()
            order.append(i)
            lock.release()

        for i in range(5):
            t = threading.Thread(target=contender, args=(i,))
            t.start()
            threads.append(t)
            while len(lock._waiters) < i + 1:  # wait until enqueued
                time.sleep(0.001)
        lock.release()
        for t in threads:
            t.join()
        assert order == [0, 1, 2, 3, 4]
        assert not lock.locked()


def write_ocr_stub(tmp_path, doc: dict) -> str:
    script = tmp_path / "fake_ocr.py"
    script.write_text(
        "import json, sys\n"
        f"doc = {doc!r}\n"
        "doc['image_ref'] = sys.argv[1]\n"
        "print(json.dumps(doc))\n",
        encoding="utf-8",
    )
    return f'"{sys.executable}" "{script}" {{image}}'


class TestExternalOcr:
    def test_external_ocr_ingest(self, tmp_path):
        cmd = write_ocr_stub(tmp_path, ocr_doc_obj("EXTERNAL", "Scanned Soup 4.00"))
        with TestClient(create_app(ocr_cmd=cmd)) as client:
            sid = make_session(client)
            payload = {
                "use_external_ocr": True,
                "image": base64.b64encode(b"raw-image-bytes").decode(),
            }
            response = client.post(f"/v1/sessions/{sid}/ingest", json=payload)
            assert response.status_code == 200
            body = response.json()
            assert body["sections"][0]["title"] == "EXTERNAL"
            assert body["sections"][0]["items"][0]["name"] == "Scanned Soup"
            assert body["provenance"]["keyframe_index"] is None

    def test_external_ocr_without_engine_400(self, client):
        sid = make_session(client)
        response = client.post(
            f"/v1/sessions/{sid}/ingest",
            json={"use_external_ocr": True, "image": base64.b64encode(b"x").decode()},
        )
        assert_error_body(response, 400, "NO_OCR_ENGINE")

    def test_invalid_base64_400(self, tmp_path):
        cmd = write_ocr_stub(tmp_path, ocr_doc_obj("X 1.00"))
        with TestClient(create_app(ocr_cmd=cmd)) as client:
            sid = make_session(client)
            response = client.post(
                f"/v1/sessions/{sid}/ingest",
                json={"use_external_ocr": True, "image": "!!! not base64 !!!"},
            )
            assert_error_body(response, 400, "BAD_REQUEST")


class TestLlmBackedService:
    def config_for(self, server) -> LlmClientConfig:
        return LlmClientConfig(
            endpoint=server.endpoint, model="stub", timeout_s=5.0, max_retries=0, backoff_s=()
        )

    def test_ingest_and_chat_use_llm(self, stub_llm):
        texts = ("HOUSE SPECIALS", "Grilled Octopus 14.00")
        structured = json.dumps(menu_to_obj(build_menu(layout_doc(*texts))))
        script = [
            (200, completion_body(structured)),
            (200, completion_body("The octopus is the move.")),
        ]
        with stub_llm(script) as server:
            app = create_app(llm_config=self.config_for(server))
            with TestClient(app) as client:
                sid = make_session(client)
                ingest = client.post(f"/v1/sessions/{sid}/ingest", json=mini_payload(*texts))
                assert ingest.status_code == 200
                assert ingest.json()["provenance"]["parser"] == "llm"
                response = client.post(f"/v1/sessions/{sid}/chat", json={"query": "dinner?"})
        body = response.json()
        assert body["text"] == "The octopus is the move."
        assert body["degraded"] is False
        assert body["ranked"][0]["name"] == "Grilled Octopus"

    def test_ingest_uses_llm_then_falls_back_on_prose(self, stub_llm):
        script = [(200, completion_body("here is some prose, not json"))]
        with stub_llm(script) as server:
            app = create_app(llm_config=self.config_for(server))
            with TestClient(app) as client:
                sid = make_session(client)
                response = client.post(
                    f"/v1/sessions/{sid}/ingest", json=mini_payload("Soup 5.00")
                )
                assert response.status_code == 200
                assert response.json()["provenance"]["parser"] == "grammar-fallback"
                assert len(server.requests) == 2  # one attempt + one correction


class TestStaticAssets:
    def test_static_dir_served_at_root(self, tmp_path):
        (tmp_path / "index.html").write_text("<html><body>menulens</body></html>")
        with TestClient(create_app(static_dir=str(tmp_path))) as client:
            response = client.get("/")
            assert response.status_code == 200
            assert "menulens" in response.text
            # API routes still take precedence
            assert client.get("/healthz").status_code == 200
