"""HTTP application: POST /v1/segment and GET /v1/health.

Protocol violations come back as 400 with a JSON error body; a model
failure on an individual prompt yields that prompt an empty candidate
list while the request still succeeds, so one bad instance never sinks a
batch.  Requests are independent and share nothing mutable except the
loaded model (which serializes itself if it must).
"""

from __future__ import annotations

import contextlib
import json
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import ServerConfig
from .errors import RequestError
from .model import build_model
from .protocol import candidate_json, parse_task

log = logging.getLogger("refserver")


def create_app(config: ServerConfig | None = None, model=None) -> FastAPI:
    """Build the application; the model loads eagerly so /v1/health only
    reports ready once the checkpoint really is usable."""
    config = config or ServerConfig()
    if model is None:
        model = build_model(config)

    app = FastAPI(title="segmentation reference server", docs_url=None,
                  redoc_url=None)
    app.state.model = model
    app.state.config = config

    @app.exception_handler(RequestError)
    async def _bad_request(_request: Request, exc: RequestError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/v1/health")
    def health() -> dict:
        return {"model": model.name, "ready": True}

    @app.post("/v1/segment")
    async def segment(request: Request) -> dict:
        try:
            doc = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise RequestError(f"request body is not valid JSON: {exc}")
        task = parse_task(doc)
        if len(task.prompts) > config.max_batch:
            raise RequestError(
                f"{len(task.prompts)} prompts exceed the server's batch "
                f"limit of {config.max_batch}"
            )
        results = []
        lock = model.lock if model.lock is not None else contextlib.nullcontext()
        with lock:
            for i, prompt in enumerate(task.prompts):
                try:
                    candidates = model.predict(task.image, prompt, task.multimask)
                except Exception:
                    log.exception("model failed on prompt %d of request %s",
                                  i, task.request_id)
                    candidates = []
                results.append({
                    "candidates": [candidate_json(m, s) for m, s in candidates]
                })
        return {"id": task.request_id, "results": results}

    return app
