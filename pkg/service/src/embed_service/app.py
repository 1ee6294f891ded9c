"""FastAPI application implementing the embedding wire protocol.

Two endpoints. GET /healthz answers ``{"status": "ok", "dim": int}`` once
the model is loaded and 503 before that. POST /embed takes ``{"texts":
[...], "normalize": bool}`` and answers ``{"embeddings": [[...]], "dim":
int, "model": str}``; any malformed, empty, or oversized request is a 400
with a reason. The model loads in the application lifespan, so a client
probing before startup completes sees the 503.

Requests encode under a lock: the client side owns batching and
parallelism, the service stays single-flight by design.
"""

from __future__ import annotations

import json
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .encoders import make_encoder, normalize_rows

DEFAULT_MAX_BATCH = 256


@dataclass(frozen=True)
class ServiceConfig:
    """Everything the sidecar needs: which model, where, how much at once."""

    model: str = "hash:768"
    port: int = 8901
    max_batch: int = DEFAULT_MAX_BATCH
    normalize_default: bool = True

    def __post_init__(self) -> None:
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1 (got {self.max_batch})")
        if not 0 < self.port < 65536:
            raise ValueError(f"port must be in (0, 65536) (got {self.port})")


class _Service:
    def __init__(self, config: ServiceConfig) -> None:
        self.config = config
        self.encoder = None
        self._lock = threading.Lock()

    @property
    def loaded(self) -> bool:
        return self.encoder is not None

    def load(self) -> None:
        if self.encoder is None:
            self.encoder = make_encoder(self.config.model)

    def embed(self, texts: list[str], normalize: bool) -> list[list[float]]:
        with self._lock:
            vectors = self.encoder.encode(texts)
        if normalize:
            vectors = normalize_rows(vectors)
        return [[float(x) for x in row] for row in vectors]


def _bad_request(reason: str) -> JSONResponse:
    return JSONResponse({"error": reason}, status_code=400)


_LOADING = JSONResponse({"status": "loading"}, status_code=503)


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    service = _Service(config)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        service.load()
        yield

    app = FastAPI(title="erhybrid embedding sidecar", lifespan=lifespan)
    app.state.service = service

    @app.get("/healthz")
    async def healthz():
        if not service.loaded:
            return _LOADING
        return {"status": "ok", "dim": service.encoder.dim}

    @app.post("/embed")
    async def embed(request: Request):
        if not service.loaded:
            return _LOADING
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _bad_request("body is not valid JSON")
        if not isinstance(body, dict):
            return _bad_request("body must be a JSON object")
        texts = body.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            return _bad_request("texts must be a list of strings")
        if not texts:
            return _bad_request("texts must not be empty")
        if len(texts) > config.max_batch:
            return _bad_request(
                f"batch of {len(texts)} exceeds max batch size {config.max_batch}"
            )
        normalize = body.get("normalize", config.normalize_default)
        if not isinstance(normalize, bool):
            return _bad_request("normalize must be a boolean")
        return {
            "embeddings": service.embed(texts, normalize),
            "dim": service.encoder.dim,
            "model": service.encoder.model_id,
        }

    return app
