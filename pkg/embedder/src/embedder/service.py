"""HTTP embedding service implementing the store client's wire protocol.

POST /embed  {"texts": [str...]} -> {"dim": int, "vectors": [[float...]...]}
GET  /info   -> {"dim": int, "model": str}

Empty batches are a 400; batches beyond the declared limit are a 413.
Vectors come back in input order.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

DEFAULT_MAX_BATCH = 256


class EmbedRequest(BaseModel):
    texts: list[str]


def create_app(encoder, max_batch: int = DEFAULT_MAX_BATCH, include_padding: bool = False) -> FastAPI:
    from .encoders import encode_text

    app = FastAPI(title="embedding service")

    @app.get("/info")
    def info():
        return {"dim": encoder.spec.dim, "model": encoder.spec.model_tag}

    @app.post("/embed")
    def embed(req: EmbedRequest):
        if not req.texts:
            return JSONResponse(status_code=400, content={"error": "empty batch"})
        if len(req.texts) > max_batch:
            return JSONResponse(
                status_code=413,
                content={"error": "batch too large", "max_batch": max_batch},
            )
        vectors = [
            encode_text(encoder, t, include_padding)[0].tolist() for t in req.texts
        ]
        return {"dim": encoder.spec.dim, "vectors": vectors}

    return app


def serve(encoder, port: int, host: str = "127.0.0.1", max_batch: int = DEFAULT_MAX_BATCH):
    import uvicorn

    uvicorn.run(create_app(encoder, max_batch), host=host, port=port)
