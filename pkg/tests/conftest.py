"""Shared fixtures: record builders and a stub embedding HTTP service."""

from __future__ import annotations

import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from erhybrid.records import Record, Source

DEFAULT_FIELDS = {
    "username": "Maresha",
    "email": "sharifi@email.com",
    "domain": "example.com",
    "servername": "server82",
    "status": "active",
}


@pytest.fixture
def make_record():
    """Build a record from the golden identity, overriding chosen fields."""

    def _make(record_id="r1", source=Source.REFERENCE, **overrides):
        fields = dict(DEFAULT_FIELDS)
        fields.update(overrides)
        return Record(record_id=record_id, source=source, fields=fields)

    return _make


def stub_vectors(texts, dim=8):
    """Deterministic, deliberately unnormalized vectors for the stub service."""
    out = []
    for text in texts:
        digest = hashlib.blake2b(text.encode("utf-8"), digest_size=dim).digest()
        out.append([float(b) - 127.5 for b in digest])
    return out


class StubEmbedService:
    """Minimal embedding service double.

    Serves /healthz and /embed with deterministic vectors; failure modes are
    toggled by assigning the attributes below before the client call.
    """

    def __init__(self):
        self.requests: list[dict] = []
        self.dim = 8
        self.fail_status: int | None = None  # respond with this status, no body
        self.raw_body: bytes | None = None  # respond 200 with these exact bytes
        self.drop_rows = 0  # return this many fewer vectors than asked
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), self._handler_class())
        self.url = f"http://127.0.0.1:{self._server.server_port}"
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def close(self):
        self._server.shutdown()
        self._server.server_close()

    def _handler_class(stub):
        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *_args):
                pass

            def _reply(self, status, body=b""):
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path != "/healthz":
                    self._reply(404)
                    return
                body = json.dumps(
                    {"status": "ok", "model": "stub", "dim": stub.dim}
                ).encode()
                self._reply(200, body)

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                stub.requests.append(payload)
                if stub.fail_status is not None:
                    self._reply(stub.fail_status)
                    return
                if stub.raw_body is not None:
                    self._reply(200, stub.raw_body)
                    return
                vectors = stub_vectors(payload["texts"], stub.dim)
                if stub.drop_rows:
                    vectors = vectors[: len(vectors) - stub.drop_rows]
                body = json.dumps(
                    {"embeddings": vectors, "model": "stub", "dim": stub.dim}
                ).encode()
                self._reply(200, body)

        return Handler


@pytest.fixture
def embed_stub():
    stub = StubEmbedService()
    yield stub
    stub.close()
