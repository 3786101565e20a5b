"""Shared fixtures: fixture paths, synthetic tokens, and a stub LLM server."""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from menulens.keyframe import ImageDims
from menulens.layout import analyze_tokens
from menulens.menu import build_menu
from menulens.ocr import OcrToken, parse_ocr_document

FIXTURES = Path(__file__).parent / "fixtures"
MENU_IDS = ["menu_en", "menu_it", "menu_pl", "menu_el"]
DIMS = ImageDims(width=1408, height=1408)
PAGE_W = 1408.0


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


def make_token(text: str, x: float, y: float, *, w: float | None = None, h: float = 40.0,
               conf: float = 0.95) -> OcrToken:
    w = 18.0 * len(text) if w is None else w
    quad = ((x, y), (x + w, y), (x + w, y + h), (x, y + h))
    return OcrToken(text=text, quad=quad, confidence=conf)


def layout_doc(*texts: str, confs: list[float] | None = None):
    """One synthetic reading-order line per text, stacked top to bottom."""
    tokens = []
    for i, text in enumerate(texts):
        conf = confs[i] if confs else 0.9
        for j, word in enumerate(text.split(" ")):
            tokens.append(make_token(word, 20.0 + 140.0 * j, 100.0 + 64.0 * i, conf=conf))
    return analyze_tokens(tokens, PAGE_W)


def menu_of(*texts: str, confs: list[float] | None = None):
    return build_menu(layout_doc(*texts, confs=confs))


def fixture_menu(menu_id: str):
    ocr_doc = parse_ocr_document((FIXTURES / "ocr" / f"{menu_id}.ocr.json").read_bytes())
    return build_menu(analyze_tokens(ocr_doc.tokens, ocr_doc.dims.width))


def ocr_doc_obj(*texts: str) -> dict:
    """Serialized OCR document with the same geometry as layout_doc."""
    tokens = []
    for i, text in enumerate(texts):
        for j, word in enumerate(text.split(" ")):
            x = 20.0 + 140.0 * j
            y = 100.0 + 64.0 * i
            w = 18.0 * len(word)
            tokens.append(
                {
                    "text": word,
                    "quad": [[x, y], [x + w, y], [x + w, y + 40], [x, y + 40]],
                    "confidence": 0.9,
                }
            )
    return {"image_ref": "synthetic", "dims": {"width": 1408, "height": 1408}, "tokens": tokens}


class StubLlmHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        self.server.requests.append({"path": self.path, "body": body, "headers": dict(self.headers)})
        status, payload = self.server.script[min(len(self.server.requests) - 1, len(self.server.script) - 1)]
        if status == "sleep":
            import time

            time.sleep(payload)
            status, payload = 200, completion_body("late reply")
        data = json.dumps(payload).encode("utf-8") if not isinstance(payload, bytes) else payload
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


def completion_body(text: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


class StubLlmServer:
    """Serves a scripted sequence of (status, json_body) responses.

    The last script entry repeats for any extra requests. Every request
    body and header set is recorded for assertions.
    """

    def __init__(self, script):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), StubLlmHandler)
        self.httpd.script = script
        self.httpd.requests = []
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()

    @property
    def endpoint(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    @property
    def requests(self):
        return self.httpd.requests


@pytest.fixture
def stub_llm():
    """Factory: stub_llm([(200, completion_body('hi'))]) as a context manager."""

    def factory(script):
        return StubLlmServer(script)

    return factory
