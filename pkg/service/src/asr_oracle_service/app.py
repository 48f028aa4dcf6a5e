"""HTTP front door.

Wire contract:

    GET  /health     -> 200 {"status": "ok", "model": "<id>"}
    POST /transcribe -> 200 {"transcript": "<text>"}
                        non-200 {"error": "<reason>"} on any failure

The transcribe body is JSON {"sample_rate": int, "samples": [float, ...]}.
Request validation is done by hand so that every failure mode, including
malformed JSON, keeps the {"error": ...} shape instead of leaking framework
error formats.
"""

import json

import numpy as np
import uvicorn
from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse

from .config import ServiceConfig
from .recognizer import SerializedRecognizer, load_recognizer

__all__ = ["create_app", "serve"]


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _parse_body(raw: bytes):
    """Return (sample_rate, samples array) or an error string."""
    try:
        body = json.loads(raw)
    except (ValueError, UnicodeDecodeError):
        return "request body is not valid JSON"
    if not isinstance(body, dict):
        return "request body must be a JSON object"
    if "sample_rate" not in body or "samples" not in body:
        return "request must carry sample_rate and samples"
    rate = body["sample_rate"]
    if isinstance(rate, bool) or not isinstance(rate, int) or rate <= 0:
        return "sample_rate must be a positive integer"
    samples = body["samples"]
    if not isinstance(samples, list):
        return "samples must be a list of numbers"
    for value in samples:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return "samples must be a list of numbers"
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size and not np.all(np.isfinite(arr)):
        return "samples must be finite"
    return rate, arr


def create_app(config: ServiceConfig) -> FastAPI:
    """Build the ASGI app.  Raises ModelLoadError if the model cannot load."""
    recognizer = SerializedRecognizer(load_recognizer(config.model))
    app = FastAPI(title="asr-oracle-service", docs_url=None, redoc_url=None,
                  openapi_url=None)

    @app.exception_handler(Exception)
    async def _unhandled(request: Request, exc: Exception) -> JSONResponse:
        return _error(500, "internal error")

    # /health stays unauthenticated so liveness probes work without
    # credentials; the token only guards transcription.
    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "model": recognizer.name}

    @app.post("/transcribe")
    async def transcribe(request: Request) -> JSONResponse:
        if config.auth_token is not None:
            header = request.headers.get("authorization", "")
            if header != f"Bearer {config.auth_token}":
                return _error(401, "missing or invalid auth token")
        parsed = _parse_body(await request.body())
        if isinstance(parsed, str):
            return _error(400, parsed)
        rate, samples = parsed
        duration = samples.size / rate
        if duration > config.max_audio_seconds:
            return _error(
                413,
                f"audio runs {duration:.2f} s, limit is "
                f"{config.max_audio_seconds:g} s",
            )
        # Inference runs on a worker thread: the recognizer's lock makes it
        # one-at-a-time without ever stalling the event loop (or /health).
        try:
            text = await run_in_threadpool(recognizer.transcribe, samples, rate)
        except Exception:
            return _error(500, "transcription failed")
        return JSONResponse({"transcript": text})

    return app


def serve(config: ServiceConfig) -> None:
    """Run until interrupted.  Model load failures raise before binding."""
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
